"""
``decaycorr`` command-line runner.

Subcommands ``simulate``, ``correlate``, ``tower``, ``verify`` and ``predict``
read a JSON config, write CSV/JSON outputs into one experiment directory and
exit with a stable code:

0 ok, 1 a verification check failed, 2 bad config, 3 missing input (or the
directory is locked by another run), 4 construction failure, 5 unsupported case.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import config as cfgmod
from . import correlation as corr
from . import rates
from . import systems as sysm
from .errors import ConstructionError, InsufficientDataError, UnsupportedCaseError, UsageError
from .observables import constant, modulus_from_dict, observable_from_dict, observable_to_dict
from .tower import (
    build_induced_tower,
    delta_bar_sequence,
    invariant_levels,
    law_from_dict,
    read_tower,
    semiconjugacy_defect,
    synth_tower,
    write_tower,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MISSING, EXIT_CONSTRUCTION, EXIT_UNSUPPORTED = 0, 1, 2, 3, 4, 5
THREADS_ENV = "DECAYCORR_THREADS"
LOCK_NAME = ".decaycorr.lock"
HENON_CAVEAT = "parameters not verified in \U0001d49c"


class MissingInput(Exception):
    """A required upstream file is absent."""


# --------------------------------------------------------------------------- #
# plumbing
# --------------------------------------------------------------------------- #

@contextlib.contextmanager
def _lock(out_dir):
    path = os.path.join(out_dir, LOCK_NAME)
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise MissingInput(f"{out_dir} is locked by another run (remove {path} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.remove(path)


def _threads(arg):
    if arg is not None:
        return int(arg)
    env = os.environ.get(THREADS_ENV)
    return int(env) if env else 1


def _write(out, name, text):
    with open(os.path.join(out, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_metadata(out, cfg, command, threads, **extra):
    """Write ``<command>.meta.json`` so each step of a pipeline keeps its own record."""
    _write(out, f"{command}.meta.json", _metadata(cfg, command, threads, **extra))


def _metadata(cfg, command, threads, **extra):
    meta = {"command": command, "version": __version__, "threads": threads, "config": cfg}
    if cfg.get("system", {}).get("kind") == "henon":
        meta["caveat"] = HENON_CAVEAT
    meta.update(extra)
    return cfgmod.dumps(meta)


def _need(path):
    if not os.path.exists(path):
        raise MissingInput(f"missing input: {path}")
    return path


def _system(cfg):
    if "system" not in cfg:
        raise cfgmod.ConfigError("this command needs a \"system\" section")
    return sysm.system_from_dict(cfg["system"])


def _observables(cfg, system):
    obs = cfg.get("observables", {})
    if "phi" not in obs or "psi" not in obs:
        raise cfgmod.ConfigError("this command needs observables.phi and observables.psi")
    return observable_from_dict(system, obs["phi"]), observable_from_dict(system, obs["psi"])


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(x):
    return repr(float(x))


# --------------------------------------------------------------------------- #
# simulate
# --------------------------------------------------------------------------- #

def _sample(cfg, system):
    est = cfg["estimator"]
    return corr.sample_srb(system, est["N"], burn_in=est["burn_in"], spacing=est["spacing"],
                           rng_seed=cfg["seed"], chains=est["chains"])


def ensemble_csv(ens) -> str:
    pts = ens.points.reshape(len(ens), -1)
    header = ["chain"] + [f"x{i}" for i in range(pts.shape[1])]
    return _csv(([int(c)] + [_f(v) for v in row] for c, row in zip(ens.chain, pts)), header)


def read_ensemble(path, system, meta=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise UsageError(f"{path} holds no points")
    data = np.array(rows[1:], dtype=float)
    chain = data[:, 0].astype(np.int64)
    pts = data[:, 1] if data.shape[1] == 2 else data[:, 1:]
    state = None
    if isinstance(system, sysm.Doubling):
        state = np.rint(pts * 2.0 ** corr.DOUBLING_BITS).astype(np.uint64)
    return corr.Ensemble(system, pts, chain, dict(meta or {}), state=state)


def cmd_simulate(cfg, out, threads):
    system = _system(cfg)
    try:
        ens = _sample(cfg, system)
    except ConstructionError as err:
        info = err.info
        _write_metadata(out, cfg, "simulate", threads, status="failed", error=str(err),
                        escape_count=info.get("escaped"), seeds=info.get("seeds"))
        raise
    _write(out, "ensemble.csv", ensemble_csv(ens))
    _write_metadata(out, cfg, "simulate", threads, status="ok", n_points=len(ens),
                    escape_count=ens.meta["escape_count"], seeds=ens.meta["seeds"])
    print(f"wrote {len(ens)} points; escaped chains: {ens.meta['escape_count']} of {ens.meta['seeds']}")
    return EXIT_OK


# --------------------------------------------------------------------------- #
# correlate
# --------------------------------------------------------------------------- #

def _series(cfg, system, phi, psi, out):
    est = cfg["estimator"]
    if est["kind"] == "time_average":
        return corr.estimate_correlation_time_average(system, phi, psi, est["N"], est["n_max"],
                                                      burn_in=est["burn_in"], rng_seed=cfg["seed"],
                                                      n_batches=est["batches"])
    if "ensemble" in est:
        ens = read_ensemble(_need(os.path.join(out, est["ensemble"])), system, {"seed": cfg["seed"]})
    else:
        ens = _sample(cfg, system)
    return corr.estimate_correlation(system, phi, psi, ens, est["n_max"], n_batches=est["batches"])


def _overlay_bound(cfg, out, phi, psi, n_values):
    """``2(|phi|+|psi|) max R(delta_n) + u_n`` when the tower outputs are present, else NaN."""
    tpath, dpath = os.path.join(out, "tower.json"), os.path.join(out, "delta_bar.csv")
    nan = np.full(len(n_values), np.nan)
    if not (os.path.exists(tpath) and os.path.exists(dpath)):
        return nan
    tower = read_tower(tpath)
    with open(dpath, newline="") as fh:
        table = {int(r["k"]): float(r["delta_bar"]) for r in csv.DictReader(fh)}
    delta = np.array([table.get(int(n), np.nan) for n in n_values])
    if tower.kind == "induced" and isinstance(tower.system, sysm.IntermittentCircle):
        u_law = rates.Polynomial(1.0 / tower.system.gamma - 1.0)
    else:
        return nan
    u = rates.evaluate(u_law, np.maximum(n_values, 1))
    mod = np.array([max(corr.declared_modulus(phi, d), corr.declared_modulus(psi, d))
                    if np.isfinite(d) else np.nan for d in delta])
    return 2.0 * (phi.sup_norm + psi.sup_norm) * mod + u


def _fit_report(cfg, series, system):
    an = cfg["analysis"]
    lines = []
    if isinstance(system, sysm.Henon):
        lines.append(f"caveat: {HENON_CAVEAT}")
    try:
        fit = rates.fit_rate(series, an["window"], an["candidates"])
    except InsufficientDataError as err:
        lines.append(f"insufficient data: {err}")
        return "\n".join(lines) + "\n", None
    lines.append(fit.to_text().rstrip("\n"))
    return "\n".join(lines) + "\n", fit


def cmd_correlate(cfg, out, threads):
    system = _system(cfg)
    phi, psi = _observables(cfg, system)
    series = _series(cfg, system, phi, psi, out)
    series.to_csv(os.path.join(out, "correlation.csv"))
    bound = _overlay_bound(cfg, out, phi, psi, series.n_values)
    rows = [" ".join([str(int(n)), _f(e), _f(s), _f(b)])
            for n, e, s, b in zip(series.n_values, series.estimates, series.std_errors, bound)]
    _write(out, "plot.dat", "# n estimate std_error bound\n" + "\n".join(rows) + "\n")
    _write(out, "plot.gp", _GNUPLOT)
    extra = {"sample_size": series.sample_size}
    if "window" in cfg["analysis"]:
        text, fit = _fit_report(cfg, series, system)
        _write(out, "fit.txt", text)
        if fit is not None:
            _write(out, "fit.csv", fit.to_csv())
            extra["fit"] = {"selected": fit.name, "model": rates.model_to_dict(fit.model),
                            "indistinguishable": fit.indistinguishable}
    _write_metadata(out, cfg, "correlate", threads, **extra)
    print(f"wrote correlation.csv ({len(series.n_values)} lags, N={series.sample_size})")
    return EXIT_OK


_GNUPLOT = """set logscale y
set xlabel "n"
set ylabel "|C_n|"
plot "plot.dat" using 1:(abs($2)):3 with yerrorbars title "estimate", \\
     "plot.dat" using 1:4 with lines title "bound"
"""


# --------------------------------------------------------------------------- #
# tower
# --------------------------------------------------------------------------- #

def _build_tower(cfg):
    tc = cfg["tower"]
    if tc["kind"] == "synthetic":
        if "law" not in tc:
            raise cfgmod.ConfigError("a synthetic tower needs tower.law")
        return synth_tower(law_from_dict(tc["law"]), tc["branching"], tc["cutoff"], tc["max_truncation"])
    system = _system(cfg)
    if not isinstance(system, (sysm.IntermittentCircle, sysm.Doubling)):
        raise UnsupportedCaseError("induced towers are built for intermittent_circle and doubling systems")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tower = build_induced_tower(system, tc["depth"], tc["min_width"], tc["max_nodes"],
                                    tc["remainder_threshold"])
    if tower.remainder > tc["remainder_threshold"]:
        raise ConstructionError(
            f"remainder mass {tower.remainder:.6g} exceeds threshold {tc['remainder_threshold']:g}",
            remainder=tower.remainder)
    return tower


def cmd_tower(cfg, out, threads):
    tc = cfg["tower"]
    tower = _build_tower(cfg)
    write_tower(tower, os.path.join(out, "tower.json"), binary=tc["binary"])
    tail = tower.tail()
    _write(out, "tail.csv", _csv(([n, _f(t)] for n, t in enumerate(tail)), ["n", "tail"]))
    extra = {"n_cells": tower.n_cells, "remainder_mass": tower.remainder, "kac_mass": tower.kac_mass}
    if tower.kind == "induced":
        k_max = min(tc["k_max"], tower.cutoff - 1)
        db = delta_bar_sequence(tower, k_max, tc["sample_budget"])
        _write(out, "delta_bar.csv", _csv(([k, _f(v)] for k, v in enumerate(db)), ["k", "delta_bar"]))
    _write_metadata(out, cfg, "tower", threads, **extra)
    print(f"tower: {tower.n_cells} cells, remainder mass {tower.remainder:.3g}")
    return EXIT_OK


# --------------------------------------------------------------------------- #
# verify
# --------------------------------------------------------------------------- #

def loglog_slope(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _default_checks(cfg):
    kind = cfg.get("system", {}).get("kind")
    if kind == "doubling":
        return ["oracle", "constant"]
    if kind == "intermittent_circle":
        return ["constant", "kac", "semiconjugacy", "tail_slope", "delta_slope", "approximation"]
    if kind == "henon":
        return ["constant", "rate_fit"]
    if kind is None:
        return ["kac"]
    return ["constant"]


def _load_series(out):
    return corr.CorrelationSeries.from_csv(_need(os.path.join(out, "correlation.csv")))


def _load_tower(out):
    return read_tower(_need(os.path.join(out, "tower.json")))


def _read_column(path, key):
    with open(_need(path), newline="") as fh:
        return np.array([float(r[key]) for r in csv.DictReader(fh)])


def _check(cfg, out, name):
    """Run one check; returns ``(verdict, value, target, detail)``."""
    an = cfg["analysis"]
    if name == "constant":
        system = _system(cfg)
        phi = _observables(cfg, system)[0] if "observables" in cfg else constant(system, 1.0)
        est = dict(cfg["estimator"])
        est["N"] = min(est["N"], 100_000)
        ens = _sample(dict(cfg, estimator=est), system)
        s = corr.estimate_correlation(system, phi, constant(system, 1.0), ens, min(est["n_max"], 8))
        worst = float(np.max(np.abs(s.estimates)))
        return ("pass" if worst == 0.0 else "fail"), worst, 0.0, "psi constant gives exactly zero"
    if name == "oracle":
        system = _system(cfg)
        kinds = [o.get("kind") for o in cfg.get("observables", {}).values()]
        if not isinstance(system, sysm.Doubling) or kinds != ["sawtooth", "sawtooth"]:
            return "skip", math.nan, math.nan, "needs doubling with sawtooth observables"
        s = _load_series(out)
        n = s.n_values[s.n_values <= 8]
        exact = np.array([corr.oracle_doubling_autocov(k) for k in n])
        dev = np.abs(s.estimates[: len(n)] - exact) / np.maximum(s.std_errors[: len(n)], 1e-300)
        worst = float(dev.max())
        return ("pass" if worst <= 3 else "fail"), worst, 3.0, "max |C_n - 2^-n/12| in standard errors, n <= 8"
    if name == "kac":
        tower = _load_tower(out)
        w = invariant_levels(tower)
        total = math.fsum(w.tolist())
        # sum_l m{R > l} over the normalized enumerated cells
        mass = math.fsum(tower.tail(include_remainder=False).tolist())
        err = abs(mass - tower.kac_mass) / tower.kac_mass
        ok = abs(total - 1.0) <= 1e-12 and err <= 1e-12
        return ("pass" if ok else "fail"), err, 0.0, "sum of level masses equals sum R m(cell)"
    if name == "semiconjugacy":
        tower = _load_tower(out)
        if tower.kind != "induced":
            return "skip", math.nan, math.nan, "synthetic towers have no projection"
        d = semiconjugacy_defect(tower, an["semiconjugacy_states"], cfg["seed"])
        return ("pass" if d <= 1e-10 else "fail"), d, 1e-10, "max d(f(pi s), pi(F s))"
    if name == "tail_slope":
        tower = _load_tower(out)
        target = -1.0 / tower.system.gamma if tower.kind == "induced" else -tower.law.alpha
        # the remainder is mass with R beyond the enumeration depth
        tail = tower.tail(include_remainder=True)
        n = np.arange(len(tail))
        lo, hi = an["tail_window"]
        sel = (n >= lo) & (n <= hi)
        slope = loglog_slope(n[sel], tail[sel])
        ok = abs(slope - target) <= an["tail_tolerance"]
        return ("pass" if ok else "fail"), slope, target, f"log-log slope of m{{R>n}} on [{lo:g}, {hi:g}]"
    if name == "delta_slope":
        tower = _load_tower(out)
        db = _read_column(os.path.join(out, "delta_bar.csv"), "delta_bar")
        k = np.arange(len(db))
        lo, hi = an["delta_window"]
        sel = (k >= lo) & (k <= hi)
        slope = loglog_slope(k[sel], db[sel])
        target = -1.0 / tower.system.gamma
        ok = abs(slope - target) <= an["delta_tolerance"]
        return ("pass" if ok else "fail"), slope, target, f"log-log slope of delta_bar_k on [{lo:g}, {hi:g}]"
    if name == "approximation":
        tower = _load_tower(out)
        phi, psi = _observables(cfg, tower.system)
        rep = corr.verify_approximation(tower, phi, psi, an["k_grid"], an["verify_n_max"],
                                        an["verify_samples"], cfg["seed"], cfg["estimator"]["batches"])
        rep.to_csv(os.path.join(out, "approximation.csv"))
        fails = sum(r.verdict == "fail" for r in rep.rows)
        verdict = "fail" if fails else ("inconclusive" if rep.inconclusive else "pass")
        worst = max((r.diff / (r.bound + 3 * r.std_error) if r.bound + 3 * r.std_error > 0 else 0.0)
                    for r in rep.rows)
        return verdict, worst, 1.0, f"{len(rep.rows)} (k, n) rows, {fails} fail, {rep.inconclusive} inconclusive"
    if name == "rate_fit":
        s = _load_series(out)
        window = an.get("window", [1, int(s.n_values.max())])
        try:
            fit = rates.fit_rate(s, window, an["candidates"])
        except InsufficientDataError as err:
            return "inconclusive", math.nan, math.nan, str(err)
        detail = f"selected {fit.name} {rates.model_to_dict(fit.model)}"
        if fit.indistinguishable:
            detail += "; indistinguishable: " + ", ".join(fit.indistinguishable)
        return "pass", fit.relative_residual, math.nan, detail
    if name == "bound":
        s = _load_series(out)
        if "bound_law" not in an:
            raise cfgmod.ConfigError("the bound check needs analysis.bound_law")
        law = rates.model_from_dict(an["bound_law"])
        b = rates.evaluate(law, np.maximum(s.n_values, 1))
        rep = rates.check_bound(s, b, an["slack"])
        return ("pass" if rep.passed else "fail"), rep.max_ratio, 1.0, rep.to_text()
    raise cfgmod.ConfigError(f"unknown check {name!r}")


def cmd_verify(cfg, out, threads):
    checks = cfg["analysis"].get("checks") or _default_checks(cfg)
    rows = []
    for name in checks:
        verdict, value, target, detail = _check(cfg, out, name)
        rows.append((name, verdict, value, target, detail))
    _write(out, "verify.csv", _csv(([n, v, _f(x), _f(t), d] for n, v, x, t, d in rows),
                                   ["check", "verdict", "value", "target", "detail"]))
    lines = [f"{n:14s} {v:12s} value={x:.6g} target={t:.6g}  {d}" for n, v, x, t, d in rows]
    if cfg.get("system", {}).get("kind") == "henon":
        lines.append(f"caveat: {HENON_CAVEAT}")
    inconclusive = any(v == "inconclusive" for _, v, *_ in rows)
    failed = any(v == "fail" for _, v, *_ in rows)
    lines.append("overall: " + ("FAIL" if failed else "PASS") + (" (some checks inconclusive)" if inconclusive else ""))
    text = "\n".join(lines) + "\n"
    _write(out, "verify.txt", text)
    _write_metadata(out, cfg, "verify", threads, failed=failed, inconclusive=inconclusive)
    sys.stdout.write(text)
    return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------------------- #
# predict
# --------------------------------------------------------------------------- #

SUPPORTED_CASES = """supported cases:
  --case henon    --theta T in (0,1), modulus hoelder | lipschitz | exp_log_power | log_poly
  --case solenoid --gamma G in (0,1), modulus hoelder | lipschitz | exp_log_power | log_poly
  --delta may override the diameter law with Exponential, StretchedExp or Polynomial"""


def _describe(m) -> str:
    if isinstance(m, rates.Exponential):
        return f"{m.C:.6g} * exp(-{m.rate:.6g} n)"
    if isinstance(m, rates.StretchedExp):
        return f"{m.C:.6g} * exp(-{m.c:.6g} n^{m.eta:.6g})"
    if isinstance(m, rates.Polynomial):
        return f"{m.C:.6g} * n^(-{m.p:.6g})"
    if isinstance(m, rates.LogPolynomial):
        return f"{m.C:.6g} * (log n)^(-{m.alpha:.6g})"
    return f"{m.C:.6g} * exp(-{m.c:.6g} (log n)^{m.alpha:.6g})"


def predict_from_spec(spec: dict):
    modulus = modulus_from_dict(spec["modulus"])
    case = spec.get("case", "henon")
    if case == "henon":
        theta = spec.get("theta", 0.5)
        if not 0 < theta < 1:
            raise UnsupportedCaseError("the Hénon case needs theta in (0, 1)")
        tail, delta = rates.henon_inputs(theta)
    else:
        tail, delta = rates.solenoid_inputs(spec.get("gamma", 0.5))
    if "delta" in spec:
        delta = rates.model_from_dict(spec["delta"])
    return rates.predict_bound(modulus, tail, delta)


def cmd_predict(spec):
    term, u, dom = predict_from_spec(spec)
    out = {"modulus_term": rates.model_to_dict(term), "u_n": rates.model_to_dict(u),
           "dominant": rates.model_to_dict(dom)}
    print(f"modulus term: {rates.model_name(term)}  {_describe(term)}")
    print(f"u_n:          {rates.model_name(u)}  {_describe(u)}")
    print(f"dominant:     {rates.model_name(dom)}  {_describe(dom)}")
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


# --------------------------------------------------------------------------- #
# entry point
# --------------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decaycorr", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in [("simulate", "sample an ensemble"), ("correlate", "estimate a correlation series"),
                      ("tower", "build a tower and its tables"), ("verify", "run verification checks")]:
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", required=True)
        _common(sp)
    sp = sub.add_parser("predict", help="print the predicted decay law")
    sp.add_argument("--config")
    sp.add_argument("--modulus", choices=["hoelder", "lipschitz", "exp_log_power", "log_poly"])
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--L", type=float)
    sp.add_argument("--case", choices=["henon", "solenoid"])
    sp.add_argument("--theta", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--delta", help="diameter law as JSON, e.g. '{\"model\": \"Polynomial\", \"p\": 2}'")
    _common(sp)
    return p


def _common(sp):
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--threads", type=int)


def _predict_spec(args):
    spec = {}
    if args.config:
        with open(_need(args.config), encoding="utf-8") as fh:
            cfg = cfgmod.parse_config(fh.read(), args.config)
        spec = dict(cfg.get("predict", {}))
    if args.modulus:
        m = {"kind": args.modulus}
        if args.modulus == "lipschitz":
            m["L"] = args.L if args.L is not None else 1.0
        else:
            if args.alpha is None:
                raise cfgmod.ConfigError("--alpha is required for this modulus")
            m["alpha"] = args.alpha
        spec["modulus"] = m
    for key in ("case", "theta", "gamma"):
        if getattr(args, key) is not None:
            spec[key] = getattr(args, key)
    if args.delta:
        try:
            spec["delta"] = json.loads(args.delta)
        except json.JSONDecodeError as err:
            raise cfgmod.ConfigError(f"--delta: {err}") from None
    if "modulus" not in spec:
        raise cfgmod.ConfigError("predict needs --modulus or a config with a predict section")
    return spec


COMMANDS = {"simulate": cmd_simulate, "correlate": cmd_correlate, "tower": cmd_tower, "verify": cmd_verify}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "predict":
            return cmd_predict(_predict_spec(args))
        with open(_need(args.config), encoding="utf-8") as fh:
            raw = cfgmod.parse_config(fh.read(), args.config)
        cfg = cfgmod.resolve(raw, seed=args.seed, out=args.out)
        out = cfg["output"]
        os.makedirs(out, exist_ok=True)
        threads = _threads(args.threads)
        with _lock(out):
            return COMMANDS[args.command](cfg, out, threads)
    except cfgmod.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInput as err:
        print(str(err), file=sys.stderr)
        return EXIT_MISSING
    except ConstructionError as err:
        info = "".join(f"; {k}={v}" for k, v in sorted(err.info.items()))
        print(f"construction failed: {err}{info}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except UnsupportedCaseError as err:
        print(f"unsupported case: {err}\n{SUPPORTED_CASES}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except UsageError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
