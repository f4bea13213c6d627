"""Rate selection for the Henon map over several seeds."""
import argparse
import os

from decaycorr import cli
from decaycorr import config as cfgmod
from decaycorr import correlation as corr
from decaycorr import rates

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=os.path.join(HERE, os.pardir, "configs", "henon.json"))
    ap.add_argument("--N", type=int, default=10_000_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[7, 3])
    args = ap.parse_args()
    with open(args.config) as fh:
        raw = cfgmod.parse_config(fh.read(), args.config)
    print(f"caveat: {cli.HENON_CAVEAT}")
    for seed in args.seeds:
        cfg = cfgmod.resolve(raw, seed=seed)
        cfg["estimator"]["N"] = args.N
        system = cli._system(cfg)
        phi, psi = cli._observables(cfg, system)
        ens = corr.sample_srb(system, args.N, burn_in=cfg["estimator"]["burn_in"],
                              spacing=cfg["estimator"]["spacing"], rng_seed=seed)
        s = corr.estimate_correlation(system, phi, psi, ens, cfg["estimator"]["n_max"])
        fit = rates.fit_rate(s, cfg["analysis"]["window"], cfg["analysis"]["candidates"])
        print(f"seed {seed}: {fit.name} {rates.model_to_dict(fit.model)}")


if __name__ == "__main__":
    main()
