"""
Observables with a prescribed modulus of continuity, and an empirical
estimator of the modulus ``R(eps) = sup{|phi(x) - phi(y)| : d(x, y) < eps}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import systems as sysm
from .errors import UsageError


# --------------------------------------------------------------------------- #
# modulus classes
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Hoelder:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise UsageError(f"Hoelder exponent must lie in (0, 1], got {self.alpha}")

    def __call__(self, eps):
        return np.asarray(eps, dtype=float) ** self.alpha

    # every profile below is concave (hence subadditive) on (0, concave_below)
    concave_below = math.inf


@dataclass(frozen=True)
class Lipschitz:
    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise UsageError("Lipschitz constant must be positive")

    def __call__(self, eps):
        return self.L * np.asarray(eps, dtype=float)

    concave_below = math.inf


@dataclass(frozen=True)
class ExpLogPower:
    """``exp(-|log eps|**alpha)``, slower than every Hölder modulus for alpha < 1."""

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise UsageError(f"ExpLogPower exponent must lie in (0, 1], got {self.alpha}")

    def __call__(self, eps):
        eps = _check_log_eps(eps)
        return np.exp(-np.abs(np.log(eps)) ** self.alpha)

    @property
    def concave_below(self):
        return math.exp(-1.0)


@dataclass(frozen=True)
class LogPoly:
    """``|log eps|**(-alpha)``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise UsageError(f"LogPoly exponent must be positive, got {self.alpha}")

    def __call__(self, eps):
        eps = _check_log_eps(eps)
        with np.errstate(divide="ignore"):
            return np.abs(np.log(eps)) ** (-self.alpha)

    @property
    def concave_below(self):
        return math.exp(-(self.alpha + 1.0))


ModulusClass = (Hoelder, Lipschitz, ExpLogPower, LogPoly)


def _check_log_eps(eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps >= 1):
        raise UsageError("log-based moduli need eps < 1")
    return eps


def modulus_bound(cls, eps):
    """Analytic ``R_class(eps)``; zero at ``eps = 0``."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise UsageError("eps must be non-negative")
    pos = eps > 0
    out = np.zeros_like(eps)
    if np.any(pos):
        out[pos] = cls(eps[pos])
    return out if out.ndim else float(out)


def combined_modulus(r_phi, r_psi):
    """``R_{phi,psi} = max(R_phi, R_psi)`` pointwise."""
    return np.maximum(np.asarray(r_phi, dtype=float), np.asarray(r_psi, dtype=float))


def modulus_to_dict(cls) -> dict:
    name = {Hoelder: "hoelder", Lipschitz: "lipschitz", ExpLogPower: "exp_log_power", LogPoly: "log_poly"}[type(cls)]
    key = "L" if isinstance(cls, Lipschitz) else "alpha"
    return {"kind": name, key: getattr(cls, key)}


def modulus_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "hoelder":
        return Hoelder(float(spec["alpha"]))
    if kind == "lipschitz":
        return Lipschitz(float(spec["L"]))
    if kind == "exp_log_power":
        return ExpLogPower(float(spec["alpha"]))
    if kind == "log_poly":
        return LogPoly(float(spec["alpha"]))
    raise UsageError(f"unknown modulus class {kind!r}")


# --------------------------------------------------------------------------- #
# observables
# --------------------------------------------------------------------------- #

KINDS = ("coordinate", "cos", "sawtooth", "radial", "constant", "sum")


@dataclass(frozen=True)
class Observable:
    """A bounded real function on the phase space of ``system``.

    ``kind`` selects the formula; ``scale`` multiplies the result. Sums of two
    observables are represented with ``kind="sum"`` and ``parts``.
    """

    system: object
    kind: str
    declared_class: object = "smooth"
    anchor: Optional[tuple] = None
    cap: float = 0.0
    index: int = 0
    value: float = 0.0
    scale: float = 1.0
    parts: tuple = field(default_factory=tuple)

    def __call__(self, p):
        return eval_observable(self, p)

    def __mul__(self, c):
        return Observable(self.system, self.kind, self.declared_class, self.anchor, self.cap,
                          self.index, self.value, self.scale * float(c), self.parts)

    __rmul__ = __mul__

    def __add__(self, other):
        if other.system != self.system:
            raise UsageError("cannot add observables on different systems")
        return Observable(self.system, "sum", "smooth", parts=(self, other))

    @property
    def sup_norm(self) -> float:
        k = self.kind
        if k == "constant":
            return abs(self.scale * self.value)
        if k == "cos":
            return abs(self.scale)
        if k == "sawtooth":
            return 0.5 * abs(self.scale)
        if k == "radial":
            return abs(self.scale) * float(self.declared_class(self.cap))
        if k == "sum":
            return abs(self.scale) * sum(p.sup_norm for p in self.parts)
        if k == "coordinate":
            if not isinstance(self.system, sysm.Henon):
                # circle coordinate in [0, 1), fiber coordinates in the unit disk
                return abs(self.scale)
            box = sysm.default_trapping_region(self.system)
            return abs(self.scale) * max(abs(box.lo[self.index]), abs(box.hi[self.index]))
        raise UsageError(f"unknown kind {k!r}")

    def critical_points(self, lo, hi):
        """Points of the interval ``[lo, hi]`` (1D systems) where the infimum can sit,
        beyond the endpoints. Exact for radial bumps; empty otherwise."""
        if self.kind == "radial" and self.scale >= 0:
            a = self.anchor[0]
            # closest representative of the anchor on the circle
            cands = np.array([a - 1.0, a, a + 1.0])
            inside = cands[(cands >= lo) & (cands <= hi)]
            return inside
        if self.kind == "cos" and self.scale >= 0:
            cands = np.array([-0.5, 0.5, 1.5])
            return cands[(cands >= lo) & (cands <= hi)]
        return np.array([])


def constant(system, c: float) -> Observable:
    return Observable(system, "constant", Lipschitz(1.0), value=float(c))


def sawtooth(system) -> Observable:
    if not sysm.is_circle_like(system):
        raise UsageError("sawtooth needs a one-dimensional system")
    return Observable(system, "sawtooth", Lipschitz(1.0))


def cosine(system) -> Observable:
    if not sysm.is_circle_like(system) and not isinstance(system, sysm.IntermittentSolenoid):
        raise UsageError("cos 2 pi x needs a circle coordinate")
    return Observable(system, "cos", Lipschitz(2 * math.pi))


def coordinate(system, index: int) -> Observable:
    if not 0 <= index < system.dim:
        raise UsageError(f"coordinate index {index} out of range for dim {system.dim}")
    return Observable(system, "coordinate", Lipschitz(1.0), index=index)


def default_cap(system, cls) -> float:
    """Radius beyond which the radial profile is held constant.

    A quarter of the space diameter, reduced so that the profile stays concave on
    ``[0, cap]``; concavity makes the modulus of ``h(d(x, anchor))`` exactly ``h``.
    """
    return min(0.25 * sysm.space_diameter(system), cls.concave_below)


def make_observable(system, cls, anchor, cap: Optional[float] = None) -> Observable:
    """Radial bump ``phi(x) = R_cls(min(d(x, anchor), cap))``."""
    if not isinstance(cls, ModulusClass):
        raise UsageError(f"not a modulus class: {cls!r}")
    anchor = np.atleast_1d(np.asarray(anchor, dtype=float))
    if anchor.shape != (system.dim,):
        raise UsageError(f"anchor needs {system.dim} coordinates")
    sysm.as_points(system, anchor if system.dim > 1 else anchor[0])
    if sysm.is_circle_like(system) or isinstance(system, sysm.IntermittentSolenoid):
        anchor[0] = anchor[0] - math.floor(anchor[0])
    if cap is None:
        cap = default_cap(system, cls)
    return Observable(system, "radial", cls, anchor=tuple(anchor), cap=float(cap))


def eval_observable(obs: Observable, p):
    system = obs.system
    p = sysm.as_points(system, p)
    k = obs.kind
    if k == "constant":
        shape = p.shape if system.dim == 1 else p.shape[:-1]
        out = np.full(shape, obs.value)
    elif k == "sawtooth":
        out = (p - np.floor(p)) - 0.5
    elif k == "cos":
        x = p if system.dim == 1 else p[..., 0]
        out = np.cos(2 * np.pi * x)
    elif k == "coordinate":
        out = p.copy() if system.dim == 1 else p[..., obs.index]
    elif k == "radial":
        a = np.asarray(obs.anchor) if system.dim > 1 else obs.anchor[0]
        r = np.minimum(sysm.distance(system, p, a), obs.cap)
        out = modulus_bound(obs.declared_class, r)
    elif k == "sum":
        out = obs.parts[0](p) + obs.parts[1](p)
    else:
        raise UsageError(f"unknown kind {k!r}")
    out = np.asarray(out, dtype=float)
    if obs.scale != 1.0:
        out = obs.scale * out
    return out if out.ndim else float(out)


def observable_to_dict(obs: Observable) -> dict:
    out = {"kind": obs.kind}
    if obs.kind == "radial":
        out["class"] = modulus_to_dict(obs.declared_class)
        out["anchor"] = list(obs.anchor)
        out["cap"] = obs.cap
    elif obs.kind == "constant":
        out["value"] = obs.value
    elif obs.kind == "coordinate":
        out["index"] = obs.index
    elif obs.kind == "sum":
        out["parts"] = [observable_to_dict(p) for p in obs.parts]
    if obs.scale != 1.0:
        out["scale"] = obs.scale
    return out


def observable_from_dict(system, spec: dict) -> Observable:
    kind = spec.get("kind")
    if kind == "radial":
        obs = make_observable(system, modulus_from_dict(spec["class"]), spec["anchor"], spec.get("cap"))
    elif kind == "constant":
        obs = constant(system, float(spec.get("value", 1.0)))
    elif kind == "sawtooth":
        obs = sawtooth(system)
    elif kind == "cos":
        obs = cosine(system)
    elif kind == "coordinate":
        obs = coordinate(system, int(spec.get("index", 0)))
    elif kind == "sum":
        a, b = (observable_from_dict(system, s) for s in spec["parts"])
        obs = a + b
    else:
        raise UsageError(f"unknown observable kind {kind!r}")
    if "scale" in spec:
        obs = obs * float(spec["scale"])
    return obs


# --------------------------------------------------------------------------- #
# modulus estimation
# --------------------------------------------------------------------------- #

def ball_partner(system, x, eps, rng):
    """Draw ``y`` uniformly in the open ``eps``-ball around each ``x``.

    Points that fall outside the phase space (doubling interval ends, the
    solenoid disk edge) come back as NaN and are discarded by the caller.
    """
    n = len(x)
    if isinstance(system, sysm.IntermittentCircle):
        y = x + rng.uniform(-eps, eps, n)
        return y - np.floor(y)
    if isinstance(system, sysm.Doubling):
        y = x + rng.uniform(-eps, eps, n)
        return np.where((y >= 0) & (y < 1), y, np.nan)
    r = eps * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    if isinstance(system, sysm.Henon):
        return x + np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    if isinstance(system, sysm.IntermittentSolenoid):
        # product (max) metric: independent balls in base and fiber
        y = x.copy()
        b = x[:, 0] + rng.uniform(-eps, eps, n)
        y[:, 0] = b - np.floor(b)
        y[:, 1] += r * np.cos(th)
        y[:, 2] += r * np.sin(th)
        outside = y[:, 1] ** 2 + y[:, 2] ** 2 > 1
        y[outside] = np.nan
        return y
    raise UsageError(f"unknown system {system!r}")


def estimate_modulus(obs: Observable, sampler, eps_grid, pairs_per_eps: int, rng_seed: int):
    """Empirical modulus of continuity on a grid of radii.

    Parameters
    ----------
    obs : Observable
    sampler : callable
        ``sampler(rng, n)`` returning ``n`` phase-space points.
    eps_grid : sequence of float
        Positive, ascending radii.
    pairs_per_eps : int
    rng_seed : int
        Each radius uses its own stream ``SeedSequence(rng_seed).spawn``.

    Returns
    -------
    list of (eps, R_hat)
        ``R_hat`` is a cumulative maximum over the grid, so it is nondecreasing;
        it is NaN for radii where no valid pair was drawn.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid <= 0) or np.any(np.diff(eps_grid) < 0):
        raise UsageError("eps_grid must be positive and ascending")
    streams = np.random.SeedSequence(rng_seed).spawn(len(eps_grid))
    raw = []
    for eps, ss in zip(eps_grid, streams):
        diffs = _pair_differences(obs, sampler, eps, pairs_per_eps, np.random.default_rng(ss))
        raw.append(np.nan if diffs.size == 0 else float(diffs.max()))
    out, running = [], -np.inf
    for eps, r in zip(eps_grid, raw):
        if not np.isnan(r):
            running = max(running, r)
        out.append((float(eps), float(running) if running > -np.inf and not np.isnan(r) else np.nan))
    return out


def _pair_differences(obs, sampler, eps, n, rng):
    system = obs.system
    x = np.asarray(sampler(rng, n), dtype=float)
    y = ball_partner(system, x, eps, rng)
    ok = ~np.isnan(y) if system.dim == 1 else ~np.isnan(y).any(axis=-1)
    x, y = x[ok], y[ok]
    if len(x) == 0:
        return np.array([])
    d = sysm.distance(system, x, y)
    keep = d < eps
    return np.abs(eval_observable(obs, x[keep]) - eval_observable(obs, y[keep]))


def fit_hoelder_exponent(estimates):
    """Slope of log R_hat against log eps over the non-missing grid points."""
    e = np.array([a for a, r in estimates if np.isfinite(r) and r > 0])
    r = np.array([r for a, r in estimates if np.isfinite(r) and r > 0])
    if len(e) < 2:
        raise UsageError("need at least two positive estimates")
    slope, _ = np.polyfit(np.log(e), np.log(r), 1)
    return float(slope)
