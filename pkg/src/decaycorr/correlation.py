"""
Correlation estimators, exact oracles and the approximation experiment.

Estimates are *signed* covariances ``Cov(phi o f^n, psi)``; the decay
functional is their absolute value (:attr:`CorrelationSeries.magnitude`).
Means are taken as ``x[0] + mean(x - x[0])``, so an exactly constant
observable yields an exactly zero estimate.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import systems as sysm
from .errors import ConstructionError, UsageError
from .observables import Observable, eval_observable, modulus_bound
from .tower.diameters import DiscretizedObservable, discretize_observable
from .tower.model import TowerModel
from .tower.orbits import (
    DOUBLING_BITS,
    TowerPath,
    doubling_advance,
    induced_paths,
    synthetic_path,
)

DEFAULT_BURN_IN = 10_000
DEFAULT_SPACING = 16
DEFAULT_BATCHES = 32
DEFAULT_CHAINS = 1024
CSV_COLUMNS = ("n", "estimate", "std_error", "estimator", "N", "seed")


# --------------------------------------------------------------------------- #
# ensembles
# --------------------------------------------------------------------------- #

@dataclass
class Ensemble:
    """Points sampled along orbits, ``points_per_chain`` consecutive retained points per chain.

    ``state`` keeps the exact integer representation of doubling-map points so
    that later iterates can draw fresh binary digits.
    """

    system: object
    points: np.ndarray
    chain: np.ndarray
    meta: dict = field(default_factory=dict)
    state: Optional[np.ndarray] = None

    def __len__(self):
        return int(self.points.shape[0])

    @property
    def n_chains(self) -> int:
        return int(self.chain.max()) + 1 if len(self) else 0


def sample_srb(system, n_points: int, burn_in: int = DEFAULT_BURN_IN, spacing: int = DEFAULT_SPACING,
               rng_seed: int = 0, chains: Optional[int] = None, max_escape: float = 0.5,
               max_rounds: int = 64) -> Ensemble:
    """Sample the physical invariant measure by burning in orbits and thinning them.

    ``chains`` orbits run in parallel; each is seeded uniformly (trapping box
    for Hénon, phase space otherwise), iterated ``burn_in`` steps and then
    contributes one point every ``spacing`` steps. Escaping Hénon chains are
    dropped whole and counted; more rounds of chains are run until
    ``n_points`` are collected.
    """
    n_points, burn_in, spacing = int(n_points), int(burn_in), int(spacing)
    if n_points < 1:
        raise UsageError("n_points must be >= 1")
    if burn_in < 1 or spacing < 1:
        raise UsageError("burn_in and spacing must be >= 1")
    chains = int(min(chains or DEFAULT_CHAINS, n_points))
    per_chain = -(-n_points // chains)
    root = np.random.SeedSequence(rng_seed)

    if isinstance(system, sysm.Doubling):
        rng = np.random.default_rng(root)
        state = rng.integers(0, 1 << DOUBLING_BITS, size=chains, dtype=np.uint64)
        state = doubling_advance(rng, state, burn_in)
        keep = np.empty((chains, per_chain), dtype=np.uint64)
        for j in range(per_chain):
            if j:
                state = doubling_advance(rng, state, spacing)
            keep[:, j] = state
        flat = keep.reshape(-1)[:n_points]
        pts = flat * float(2.0 ** -DOUBLING_BITS)
        chain = np.repeat(np.arange(chains), per_chain)[:n_points]
        meta = _meta(burn_in, spacing, rng_seed, 0, chains, chains)
        return Ensemble(system, pts, chain, meta, state=flat)

    if isinstance(system, sysm.Henon):
        try:
            sysm.default_trapping_region(system)
        except ConstructionError as err:
            raise ConstructionError(
                f"no trapping region for a={system.a}, b={system.b}: {err}",
                escape_rate=err.info.get("escape_rate", 1.0), escaped=chains, seeds=chains,
            ) from err

    collected, chain_ids = [], []
    escaped = seeds = 0
    next_id = 0
    for r, ss in enumerate(root.spawn(max_rounds)):
        rng = np.random.default_rng(ss)
        x = sysm.uniform_sample(system, rng, chains)
        dead = np.zeros(chains, dtype=bool)
        for _ in range(burn_in):
            x = sysm.step(system, x)
            dead |= sysm.escaped(system, x) | _nan_rows(x)
            x = _park(x, dead)
        out = np.empty((chains, per_chain) + x.shape[1:])
        for j in range(per_chain):
            if j:
                for _ in range(spacing):
                    x = sysm.step(system, x)
                    dead |= sysm.escaped(system, x) | _nan_rows(x)
                    x = _park(x, dead)
            out[:, j] = x
        seeds += chains
        escaped += int(dead.sum())
        alive = np.flatnonzero(~dead)
        for c in alive:
            collected.append(out[c])
            chain_ids.append(np.full(per_chain, next_id))
            next_id += 1
        if seeds and escaped / seeds > max_escape:
            raise ConstructionError(
                f"escape fraction {escaped / seeds:.3f} exceeds {max_escape} "
                f"({escaped} of {seeds} chains escaped)",
                escape_rate=escaped / seeds, escaped=escaped, seeds=seeds,
            )
        if next_id * per_chain >= n_points:
            break
    else:
        raise ConstructionError("could not collect enough non-escaping chains",
                                escaped=escaped, seeds=seeds)
    pts = np.concatenate(collected)[:n_points]
    chain = np.concatenate(chain_ids)[:n_points]
    return Ensemble(system, pts, chain, _meta(burn_in, spacing, rng_seed, escaped, seeds, chains))


def _meta(burn_in, spacing, seed, escaped, seeds, chains):
    return {"burn_in": burn_in, "spacing": spacing, "seed": seed, "escape_count": int(escaped),
            "seeds": int(seeds), "chains": int(chains)}


def _nan_rows(x):
    return np.isnan(x) if x.ndim == 1 else np.isnan(x).any(axis=-1)


def _park(x, dead):
    """Keep dead Hénon chains at the origin so that arithmetic stays finite."""
    if dead.any():
        x = x.copy()
        x[dead] = 0.0
    return x


# --------------------------------------------------------------------------- #
# series
# --------------------------------------------------------------------------- #

@dataclass
class CorrelationSeries:
    n_values: np.ndarray
    estimates: np.ndarray
    std_errors: np.ndarray
    estimator_kind: str
    sample_size: int
    seed: Optional[int] = None
    batch_estimates: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.n_values = np.asarray(self.n_values, dtype=np.int64)
        self.estimates = np.asarray(self.estimates, dtype=float)
        self.std_errors = np.asarray(self.std_errors, dtype=float)
        if np.any(self.std_errors < 0):
            raise UsageError("standard errors must be non-negative")

    @property
    def magnitude(self) -> np.ndarray:
        """``|C_n|``, the decay functional."""
        return np.abs(self.estimates)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        seed = "" if self.seed is None else self.seed
        for n, e, s in zip(self.n_values, self.estimates, self.std_errors):
            w.writerow([int(n), repr(float(e)), repr(float(s)), self.estimator_kind, self.sample_size, seed])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "CorrelationSeries":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise UsageError(f"{path} holds no rows")
        seed = rows[0]["seed"]
        return cls(
            n_values=[int(r["n"]) for r in rows],
            estimates=[float(r["estimate"]) for r in rows],
            std_errors=[float(r["std_error"]) for r in rows],
            estimator_kind=rows[0]["estimator"],
            sample_size=int(rows[0]["N"]),
            seed=int(seed) if seed != "" else None,
        )


# --------------------------------------------------------------------------- #
# estimators
# --------------------------------------------------------------------------- #

def _shifted_mean(x):
    return x[0] + np.mean(x - x[0]) if x.size else 0.0


def _batch_ids(chain, n_chains, n_batches):
    """Group whole chains into batches; fall back to contiguous blocks when chains are few."""
    n = len(chain)
    if n_chains >= n_batches:
        return (chain * n_batches) // n_chains, n_batches
    b = min(n_batches, n)
    return (np.arange(n) * b) // n, b


def _batch_cov(a, b, ids, n_batches):
    """Per-batch covariances from shifted sums."""
    a = a - a[0]
    b = b - b[0]
    cnt = np.bincount(ids, minlength=n_batches).astype(float)
    sa = np.bincount(ids, weights=a, minlength=n_batches)
    sb = np.bincount(ids, weights=b, minlength=n_batches)
    sab = np.bincount(ids, weights=a * b, minlength=n_batches)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sab / cnt - (sa / cnt) * (sb / cnt)


def _ensemble_iterates(system, ens: Ensemble, n_max: int):
    """Yield ``f^n`` of the ensemble points for ``n = 0 .. n_max``."""
    if isinstance(system, sysm.Doubling) and ens.state is not None:
        rng = np.random.default_rng([int(ens.meta.get("seed", 0)), 0x5EED])
        state = ens.state.copy()
        mask = np.uint64((1 << DOUBLING_BITS) - 1)
        one = np.uint64(1)
        for n in range(n_max + 1):
            if n:
                bits = rng.integers(0, 2, size=state.shape, dtype=np.uint64)
                state = ((state << one) & mask) | bits
            yield state * float(2.0 ** -DOUBLING_BITS)
        return
    x = ens.points
    for n in range(n_max + 1):
        if n:
            x = sysm.step(system, x)
        yield x


def estimate_correlation(system, phi: Observable, psi: Observable, ensemble: Ensemble, n_max: int,
                         n_batches: int = DEFAULT_BATCHES) -> CorrelationSeries:
    """Ensemble estimator ``C_n = mean(phi(f^n x) psi(x)) - mean(phi(f^n x)) mean(psi(x))``.

    Standard errors come from batch means over groups of chains.
    """
    if len(ensemble) == 0:
        raise UsageError("empty ensemble")
    if phi.system != system or psi.system != system:
        raise UsageError("observables are defined on a different system")
    n_max = int(n_max)
    if n_max < 0:
        raise UsageError("n_max must be >= 0")
    b = np.asarray(eval_observable(psi, ensemble.points), dtype=float)
    bc = b - _shifted_mean(b)
    ids, nb = _batch_ids(ensemble.chain, ensemble.n_chains, n_batches)
    est, se, batches = [], [], []
    for x in _ensemble_iterates(system, ensemble, n_max):
        a = np.asarray(eval_observable(phi, x), dtype=float)
        ok = np.isfinite(a)
        if not ok.all():
            a = np.where(ok, a, _shifted_mean(a[ok]))
        ac = a - _shifted_mean(a)
        est.append(float(np.mean(ac * bc)))
        per = _batch_cov(a, b, ids, nb)
        batches.append(per)
        se.append(float(np.std(per, ddof=1) / math.sqrt(nb)) if nb > 1 else float("nan"))
    return CorrelationSeries(np.arange(n_max + 1), est, se, "ensemble", len(ensemble),
                             ensemble.meta.get("seed"), np.array(batches).T)


def lagged_covariance(a_chains: Sequence[np.ndarray], b_chains: Sequence[np.ndarray], n_max: int,
                      n_batches: int = DEFAULT_BATCHES):
    """Time-average ``Cov(a_{t+n}, b_t)`` over one or more chains.

    Returns ``(estimates, std_errors, batch_estimates, n_pairs_at_lag0)``. With
    at least ``n_batches`` chains each batch is a group of chains; otherwise each
    chain is cut into contiguous blocks of pairs.
    """
    if len(a_chains) != len(b_chains) or not a_chains:
        raise UsageError("need matching, non-empty chain lists")
    a0 = float(a_chains[0][0])
    b0 = float(b_chains[0][0])
    n_chains = len(a_chains)
    if n_chains >= n_batches:
        nb, per_chain = n_batches, 1
    else:
        per_chain = max(1, n_batches // n_chains)
        nb = n_chains * per_chain
    est = np.empty(n_max + 1)
    se = np.empty(n_max + 1)
    batch_est = np.empty((nb, n_max + 1))
    for n in range(n_max + 1):
        S = np.zeros((4, nb))  # count, sum x, sum y, sum xy
        for c, (a, b) in enumerate(zip(a_chains, b_chains)):
            T = len(a)
            if T <= n:
                continue
            x = a[n:] - a0
            y = b[: T - n] - b0
            xy = x * y
            if per_chain == 1:
                k = (c * nb) // n_chains
                S[:, k] += (T - n, x.sum(), y.sum(), xy.sum())
            else:
                edges = (np.arange(per_chain) * (T - n)) // per_chain
                k = slice(c * per_chain, (c + 1) * per_chain)
                S[0, k] += np.diff(np.append(edges, T - n))
                S[1, k] += np.add.reduceat(x, edges)
                S[2, k] += np.add.reduceat(y, edges)
                S[3, k] += np.add.reduceat(xy, edges)
        cnt, sx, sy, sxy = S
        N = cnt.sum()
        est[n] = sxy.sum() / N - (sx.sum() / N) * (sy.sum() / N)
        with np.errstate(invalid="ignore", divide="ignore"):
            batch_est[:, n] = sxy / cnt - (sx / cnt) * (sy / cnt)
        se[n] = np.std(batch_est[:, n], ddof=1) / math.sqrt(nb) if nb > 1 else np.nan
    n0 = int(sum(len(a) for a in a_chains))
    return est, se, batch_est, n0


def sample_orbits(system, n_chains: int, length: int, burn_in: int = DEFAULT_BURN_IN, rng_seed: int = 0):
    """``n_chains`` orbit segments of ``length`` points after ``burn_in`` steps (shape ``(chains, length, ...)``)."""
    ens = sample_srb(system, n_chains * length, burn_in=burn_in, spacing=1, rng_seed=rng_seed,
                     chains=n_chains)
    shape = (n_chains, length) + ens.points.shape[1:]
    return ens.points.reshape(shape)


def estimate_correlation_time_average(system, phi: Observable, psi: Observable, n_points: int, n_max: int,
                                      burn_in: int = DEFAULT_BURN_IN, rng_seed: int = 0,
                                      n_batches: int = DEFAULT_BATCHES) -> CorrelationSeries:
    """Birkhoff-average estimator along ``n_batches`` independent orbits."""
    per = -(-int(n_points) // n_batches) + int(n_max)
    orbits = sample_orbits(system, n_batches, per, burn_in, rng_seed)
    a = [np.asarray(eval_observable(phi, o), dtype=float) for o in orbits]
    b = [np.asarray(eval_observable(psi, o), dtype=float) for o in orbits]
    est, se, batches, n0 = lagged_covariance(a, b, int(n_max), n_batches)
    return CorrelationSeries(np.arange(n_max + 1), est, se, "time_average", n0, rng_seed, batches.T)


# --------------------------------------------------------------------------- #
# tower functions and the tower estimator
# --------------------------------------------------------------------------- #

TowerFunction = Callable[[TowerPath], np.ndarray]


def level_indicator(level: int = 0) -> TowerFunction:
    """Indicator of tower level ``level``."""
    return lambda path: (path.level == level).astype(float)


def constant_tower_function(c: float) -> TowerFunction:
    return lambda path: np.full(path.length, float(c))


def level_function(values) -> TowerFunction:
    """Function of the level only: ``values[level]`` (zero beyond the table)."""
    values = np.asarray(values, dtype=float)

    def f(path):
        lv = np.asarray(path.level)
        out = np.zeros(len(lv))
        ok = (lv >= 0) & (lv < len(values))
        out[ok] = values[lv[ok]]
        return out
    return f


def _tower_values(fn, path):
    if isinstance(fn, DiscretizedObservable):
        return fn.on_path(path)[0]
    return np.asarray(fn(path), dtype=float)


def _lookahead(*fns):
    return max([2 * fn.k for fn in fns if isinstance(fn, DiscretizedObservable)], default=0)


def estimate_correlation_tower(tower: TowerModel, phi_bar, psi_bar, n_max: int, samples: int,
                               rng_seed: int = 0, n_batches: int = DEFAULT_BATCHES,
                               burn_in: int = 1000) -> CorrelationSeries:
    """Time-average covariance of tower functions along ``n_batches`` independent tower orbits.

    Synthetic orbits start from the invariant tower measure; induced orbits
    start at a base visit after ``burn_in`` steps of the circle map.
    """
    n_max = int(n_max)
    length = -(-int(samples) // n_batches) + n_max
    rng = np.random.default_rng(rng_seed)
    if tower.kind == "synthetic":
        paths = [synthetic_path(tower, rng, length) for _ in range(n_batches)]
    else:
        paths = induced_paths(tower, rng, n_batches, length, burn_in, _lookahead(phi_bar, psi_bar))
    a = [_tower_values(phi_bar, p) for p in paths]
    b = [_tower_values(psi_bar, p) for p in paths]
    est, se, batches, n0 = lagged_covariance(a, b, n_max, n_batches)
    return CorrelationSeries(np.arange(n_max + 1), est, se, "time_average", n0, rng_seed, batches.T)


# --------------------------------------------------------------------------- #
# oracles
# --------------------------------------------------------------------------- #

def oracle_doubling_autocov(n: int) -> float:
    """``Cov(s o f^n, s)`` for the sawtooth ``s(x) = x - 1/2`` under doubling: ``2^-n / 12``."""
    n = int(n)
    if n < 0:
        raise UsageError("n must be >= 0")
    return math.ldexp(1.0, -n) / 12.0


def renewal_autocov(tower: TowerModel, n_max: int) -> np.ndarray:
    """Exact autocovariance of the level-0 indicator on a tower with i.i.d. returns.

    With ``f_k = P(R = k)`` the renewal sequence ``u_0 = 1``,
    ``u_n = sum_k f_k u_{n-k}`` is the probability of being at level 0 at time
    ``n`` given level 0 at time 0; the covariance is ``p0 u_n - p0**2`` with
    ``p0 = 1 / E[R]``.
    """
    f = tower.return_law()
    p0 = 1.0 / tower.kac_mass
    u = np.zeros(n_max + 1)
    u[0] = 1.0
    for n in range(1, n_max + 1):
        k = np.arange(1, min(n, len(f) - 1) + 1)
        u[n] = float(np.dot(f[k], u[n - k]))
    return p0 * u - p0 * p0


# --------------------------------------------------------------------------- #
# approximation experiment
# --------------------------------------------------------------------------- #

@dataclass
class ApproximationRow:
    k: int
    n: int
    c_tilde: float
    c_bar: float
    diff: float
    std_error: float
    delta_hat: float
    bound: float
    verdict: str


@dataclass
class ApproximationReport:
    rows: list
    sample_size: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.verdict != "fail" for r in self.rows)

    @property
    def inconclusive(self) -> int:
        return sum(r.verdict == "inconclusive" for r in self.rows)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "n", "c_tilde", "c_bar", "diff", "std_error", "delta_hat", "bound", "verdict"])
        for r in self.rows:
            w.writerow([r.k, r.n, repr(r.c_tilde), repr(r.c_bar), repr(r.diff), repr(r.std_error),
                        repr(r.delta_hat), repr(r.bound), r.verdict])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def declared_modulus(obs: Observable, eps: float) -> float:
    """Declared modulus at ``eps`` (capped at 1/2, where log classes are defined)."""
    if obs.kind == "constant":
        return 0.0
    if obs.kind == "sum":
        return abs(obs.scale) * sum(declared_modulus(p, eps) for p in obs.parts)
    return abs(obs.scale) * float(modulus_bound(obs.declared_class, min(eps, 0.5)))


def verify_approximation(tower: TowerModel, phi: Observable, psi: Observable, k_grid, n_max: int,
                         samples: int = 1_000_000, rng_seed: int = 0, n_batches: int = DEFAULT_BATCHES,
                         burn_in: int = 1000) -> ApproximationReport:
    """Compare ``C_n(phi o pi, psi o pi)`` with ``C_n(phi_bar_k, psi_bar_k)`` on the same tower orbits.

    For each ``k`` the observed gap must not exceed
    ``2 (|phi|_inf + |psi|_inf) max(R_phi(delta_k), R_psi(delta_k))`` plus three
    standard errors of the gap, where ``delta_k`` is the largest image diameter
    met along the orbits. A row whose gap exceeds the bound while its standard
    error alone exceeds the bound is inconclusive rather than failed.
    """
    if tower.kind != "induced":
        raise UsageError("the approximation experiment needs an induced tower")
    k_grid = [int(k) for k in k_grid]
    n_max = int(n_max)
    length = -(-int(samples) // n_batches) + n_max
    rng = np.random.default_rng(rng_seed)
    paths = induced_paths(tower, rng, n_batches, length, burn_in, 2 * max(k_grid))
    a_t = [np.asarray(eval_observable(phi, p.base), dtype=float) for p in paths]
    b_t = [np.asarray(eval_observable(psi, p.base), dtype=float) for p in paths]
    c_t, _, batch_t, n0 = lagged_covariance(a_t, b_t, n_max, n_batches)
    norm = phi.sup_norm + psi.sup_norm
    rows = []
    for k in k_grid:
        dphi = discretize_observable(tower, phi, k)
        dpsi = discretize_observable(tower, psi, k)
        a_b, b_b, widths = [], [], []
        for p in paths:
            va, w = dphi.on_path(p)
            vb, _ = dpsi.on_path(p)
            a_b.append(va)
            b_b.append(vb)
            widths.append(w)
        delta_hat = float(max(np.nanmax(w) for w in widths))
        c_b, _, batch_b, _ = lagged_covariance(a_b, b_b, n_max, n_batches)
        diff_batches = batch_t - batch_b
        nb = diff_batches.shape[0]
        se = np.std(diff_batches, axis=0, ddof=1) / math.sqrt(nb)
        bound = 2.0 * norm * max(declared_modulus(phi, delta_hat), declared_modulus(psi, delta_hat))
        for n in range(n_max + 1):
            diff = abs(c_t[n] - c_b[n])
            if diff <= bound + 3 * se[n]:
                verdict = "pass"
            elif se[n] > bound:
                verdict = "inconclusive"
            else:
                verdict = "fail"
            rows.append(ApproximationRow(k, n, float(c_t[n]), float(c_b[n]), float(diff), float(se[n]),
                                         delta_hat, float(bound), verdict))
    return ApproximationReport(rows, n0, rng_seed)
