"""Ensemble estimate of the doubling-map sawtooth autocovariance against its exact value."""
import argparse
import time

from decaycorr import correlation as corr
from decaycorr import observables as ob
from decaycorr import systems as sysm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=1_000_000)
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    system = sysm.Doubling()
    saw = ob.sawtooth(system)
    t0 = time.perf_counter()
    ens = corr.sample_srb(system, args.N, burn_in=10_000, spacing=16, rng_seed=args.seed)
    s = corr.estimate_correlation(system, saw, saw, ens, args.n_max)
    print(f"# N={args.N} seed={args.seed} elapsed={time.perf_counter() - t0:.2f}s")
    print(f"{'n':>3} {'estimate':>13} {'exact':>13} {'std_error':>11} {'z':>6}")
    for n, e, se in zip(s.n_values, s.estimates, s.std_errors):
        exact = corr.oracle_doubling_autocov(int(n))
        print(f"{int(n):3d} {e:13.6e} {exact:13.6e} {se:11.3e} {(e - exact) / se:6.2f}")


if __name__ == "__main__":
    main()
