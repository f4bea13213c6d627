"""Level-0 autocovariance of synthetic towers with exponential, stretched and polynomial tails."""
import argparse

import numpy as np

from decaycorr import correlation as corr
from decaycorr import rates
from decaycorr.errors import InsufficientDataError
from decaycorr.tower import ExpTail, PolyTail, StretchedTail, synth_tower

LAWS = {"exp": ExpTail(0.5), "stretched": StretchedTail(1.0, 0.5), "poly": PolyTail(3.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10_000_000)
    ap.add_argument("--n-max", type=int, default=30)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()
    ind = corr.level_indicator(0)
    for name, law in LAWS.items():
        tower = synth_tower(law, cutoff=100_000)
        s = corr.estimate_correlation_tower(tower, ind, ind, args.n_max, args.samples, rng_seed=args.seed)
        oracle = corr.renewal_autocov(tower, args.n_max)
        z = np.abs(s.estimates - oracle) / s.std_errors
        print(f"== {name}: max |estimate - renewal oracle| = {z.max():.2f} standard errors")
        try:
            print(rates.fit_rate(s, (1, args.n_max)).to_text(), end="")
        except InsufficientDataError as err:
            print(f"no fit: {err}")


if __name__ == "__main__":
    main()
