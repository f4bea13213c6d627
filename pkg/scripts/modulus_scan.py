"""Empirical modulus of continuity of radial bumps in each class."""
import argparse

import numpy as np

from decaycorr import observables as ob
from decaycorr import systems as sysm

CLASSES = [ob.Hoelder(0.5), ob.Lipschitz(1.0), ob.ExpLogPower(0.5), ob.LogPoly(1.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    circle = sysm.IntermittentCircle(0.5, 2)
    grid = np.geomspace(1e-4, 1e-1, 10)
    for cls in CLASSES:
        bump = ob.make_observable(circle, cls, 0.3)
        est = ob.estimate_modulus(bump, lambda rng, n: rng.random(n), grid, args.pairs, args.seed)
        ratios = [r / ob.modulus_bound(cls, e) for e, r in est]
        print(f"{ob.modulus_to_dict(cls)}: R_hat / R at eps grid = " + " ".join(f"{q:.3f}" for q in ratios))
        if isinstance(cls, ob.Hoelder):
            print(f"  fitted exponent {ob.fit_hoelder_exponent(est):.4f}")


if __name__ == "__main__":
    main()
