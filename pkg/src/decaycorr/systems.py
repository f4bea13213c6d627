"""
Concrete maps: Hénon, an intermittent circle map, the intermittent solenoid
built over it, and the doubling map used as an exactly solvable oracle.

Points are numpy arrays. One-dimensional systems (circle, doubling) take an
array of any shape and treat every entry as a coordinate; the Hénon map and the
solenoid expect the last axis to hold the coordinates, so a batch of ``N``
solenoid points has shape ``(N, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import ConstructionError, UsageError

# |x| beyond this is treated as escape to infinity for the Hénon map.
ESCAPE_RADIUS = 1e6
MAX_ITERATE = 10**9

SOLENOID_CONTRACTION = 0.1
SOLENOID_AMPLITUDE = 0.5


@dataclass(frozen=True)
class Henon:
    a: float = 1.4
    b: float = 0.3

    def __post_init__(self):
        if self.b == 0:
            raise UsageError("Hénon map needs b != 0 to be invertible")

    dim = 2


@dataclass(frozen=True)
class IntermittentCircle:
    """Degree-``d`` circle map with a neutral fixed point at 0.

    On ``[0, 1/d)`` the map is ``x + (d-1) x (d x)**gamma``; every other branch
    ``[j/d, (j+1)/d)`` is the affine full branch ``d x - j``.
    """

    gamma: float = 0.5
    d: int = 2

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise UsageError(f"gamma must lie in (0, 1), got {self.gamma}")
        if int(self.d) != self.d or self.d < 2:
            raise UsageError(f"degree d must be an integer >= 2, got {self.d}")

    dim = 1


@dataclass(frozen=True)
class IntermittentSolenoid:
    gamma: float = 0.5
    d: int = 2

    def __post_init__(self):
        IntermittentCircle(self.gamma, self.d)

    @property
    def base(self) -> IntermittentCircle:
        return IntermittentCircle(self.gamma, self.d)

    dim = 3


@dataclass(frozen=True)
class Doubling:
    dim = 1

    # the doubling map is the degree-2 expanding circle map with no neutral point
    d = 2


SystemSpec = Union[Henon, IntermittentCircle, IntermittentSolenoid, Doubling]


def is_circle_like(system) -> bool:
    return isinstance(system, (IntermittentCircle, Doubling))


def as_points(system, p) -> np.ndarray:
    """Validate ``p`` against the phase space of ``system`` and return a float array."""
    arr = np.asarray(p, dtype=float)
    if system.dim == 1:
        return arr
    if arr.ndim == 0 or arr.shape[-1] != system.dim:
        raise UsageError(
            f"{type(system).__name__} points need {system.dim} coordinates, got shape {arr.shape}"
        )
    if isinstance(system, IntermittentSolenoid):
        r2 = arr[..., 1] ** 2 + arr[..., 2] ** 2
        if np.any(r2 > 1 + 1e-12):
            raise UsageError("solenoid fiber coordinates must lie in the closed unit disk")
    return arr


def _reduce(x):
    return x - np.floor(x)


def intermittent_map(x, gamma, d):
    """Vectorized circle map; ``x`` is assumed in ``[0, 1)``."""
    x = np.asarray(x, dtype=float)
    dx = d * x
    j = np.floor(dx)
    out = dx - j
    left = j == 0
    if np.any(left):
        xl = x[left] if x.ndim else x
        # written as x + x*(...) to avoid cancellation next to the fixed point
        val = xl + (d - 1) * xl * (d * xl) ** gamma
        # true image is < 1; rounding up to 1.0 would wrap onto the fixed point
        val = np.where(val >= 1.0, np.nextafter(1.0, 0.0), val)
        if x.ndim:
            out[left] = val
        else:
            out = val
    return out


def doubling_map(x):
    x = np.asarray(x, dtype=float)
    return _reduce(2.0 * x)


def step(system, p):
    """One application of the map."""
    p = as_points(system, p)
    if isinstance(system, Henon):
        x, y = p[..., 0], p[..., 1]
        with np.errstate(over="ignore", invalid="ignore"):
            nx = 1.0 - system.a * x * x + y
            ny = system.b * x
            bad = ~np.isfinite(nx) | (np.abs(nx) > ESCAPE_RADIUS)
        nx = np.where(bad, np.nan, nx)
        ny = np.where(bad, np.nan, ny)
        return np.stack([nx, ny], axis=-1)
    if isinstance(system, IntermittentCircle):
        return intermittent_map(_reduce(p), system.gamma, system.d)
    if isinstance(system, Doubling):
        return doubling_map(_reduce(p))
    if isinstance(system, IntermittentSolenoid):
        x = _reduce(p[..., 0])
        angle = 2 * np.pi * x
        nx = intermittent_map(x, system.gamma, system.d)
        ny = SOLENOID_CONTRACTION * p[..., 1] + SOLENOID_AMPLITUDE * np.cos(angle)
        nz = SOLENOID_CONTRACTION * p[..., 2] + SOLENOID_AMPLITUDE * np.sin(angle)
        return np.stack([nx, ny, nz], axis=-1)
    raise UsageError(f"unknown system {system!r}")


def iterate(system, p, n: int):
    """``n``-fold composition of :func:`step`; ``iterate(s, p, 0)`` returns ``p``."""
    n = int(n)
    if n < 0:
        raise UsageError("n must be non-negative")
    if n > MAX_ITERATE:
        raise UsageError(f"n={n} exceeds the configured maximum {MAX_ITERATE}")
    q = as_points(system, p)
    for _ in range(n):
        q = step(system, q)
    return q


def henon_inverse(system: Henon, p):
    p = as_points(system, p)
    x, y = p[..., 0], p[..., 1]
    u = y / system.b
    return np.stack([u, x - 1.0 + system.a * u * u], axis=-1)


def escaped(system, p) -> np.ndarray:
    """Boolean mask of escaped Hénon points (always False for compact phase spaces)."""
    p = np.asarray(p, dtype=float)
    if isinstance(system, Henon):
        return ~np.isfinite(p[..., 0]) | (np.abs(p[..., 0]) > ESCAPE_RADIUS)
    return np.zeros(p.shape if system.dim == 1 else p.shape[:-1], dtype=bool)


def base_derivative(system, x):
    """Derivative of the one-dimensional base map (intermittent or doubling)."""
    if isinstance(system, Doubling):
        return np.full_like(np.asarray(x, dtype=float), 2.0)
    if not isinstance(system, IntermittentCircle):
        raise UsageError("base_derivative needs an IntermittentCircle (or Doubling) system")
    x = _reduce(np.asarray(x, dtype=float))
    g, d = system.gamma, system.d
    left = d * x < 1
    with np.errstate(invalid="ignore"):
        dl = 1.0 + (d - 1) * (1 + g) * (d * x) ** g
    return np.where(left, dl, float(d))


def branch_index(system, x):
    """Index ``j`` of the monotone branch ``[j/d, (j+1)/d)`` containing ``x``."""
    d = system.d
    x = _reduce(np.asarray(x, dtype=float))
    return np.minimum(np.floor(d * x), d - 1).astype(np.int64)


def left_branch_inverse(system, y, max_iter=100):
    """Inverse of the branch through the fixed point 0, mapping ``[0, 1]`` onto ``[0, 1/d]``.

    The left branch is convex and increasing with g(x) >= x, so Newton started at
    ``x = y`` decreases monotonically onto the root.
    """
    y = np.asarray(y, dtype=float)
    if isinstance(system, Doubling):
        return y / 2.0
    g, c, d = system.gamma, system.d - 1, system.d
    x = y.copy() if y.ndim else np.array(y)
    for _ in range(max_iter):
        dx = (d * x) ** g
        fx = x + c * x * dx - y
        fp = 1.0 + c * (1 + g) * dx
        xn = np.maximum(x - fx / fp, 0.0)
        if np.all(xn >= x):
            break
        x = np.minimum(x, xn)
    return x if y.ndim else float(x)


def branch_inverse(system, b: int, y):
    """Inverse of branch ``b`` (0 is the neutral branch, others are affine)."""
    if b == 0:
        return left_branch_inverse(system, y)
    return (np.asarray(y, dtype=float) + b) / system.d


def _arc(dx):
    dx = np.abs(dx)
    dx = dx - np.floor(dx)
    return np.minimum(dx, 1.0 - dx)


def distance(system, p, q):
    p = as_points(system, p)
    q = as_points(system, q)
    if isinstance(system, Henon):
        return np.hypot(p[..., 0] - q[..., 0], p[..., 1] - q[..., 1])
    if isinstance(system, IntermittentCircle):
        return _arc(p - q)
    if isinstance(system, Doubling):
        # interval metric on [0, 1): the sawtooth oracle is 1-Lipschitz for it
        return np.abs(p - q)
    if isinstance(system, IntermittentSolenoid):
        fiber = np.hypot(p[..., 1] - q[..., 1], p[..., 2] - q[..., 2])
        return np.maximum(_arc(p[..., 0] - q[..., 0]), fiber)
    raise UsageError(f"unknown system {system!r}")


@dataclass(frozen=True)
class TrappingRegion:
    lo: tuple
    hi: tuple
    escape_rate: float
    n_seeds: int
    horizon: int

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.all((p >= lo) & (p <= hi), axis=-1)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, len(self.lo)))


CLASSICAL_BOX = ((-1.8, -0.6), (1.8, 0.6))


def trapping_region(system: Henon, n_seeds=1000, horizon=1000, max_escape=0.5, rng_seed=0):
    """Axis-aligned seeding box for Hénon attractor sampling.

    The classical parameters use a fixed box; other parameters get the padded
    bounding box of a long orbit. The fraction of seeds escaping within
    ``horizon`` steps is measured and must not exceed ``max_escape``.
    """
    if not isinstance(system, Henon):
        raise UsageError("trapping_region is defined for the Hénon map only")
    if (system.a, system.b) == (1.4, 0.3):
        lo, hi = CLASSICAL_BOX
    else:
        p = np.zeros(2)
        orbit = []
        for t in range(20000):
            p = step(system, p)
            if np.isnan(p[0]):
                raise ConstructionError(
                    f"orbit from the origin escapes for a={system.a}, b={system.b}",
                    escape_rate=1.0,
                )
            if t >= 10000:
                orbit.append(p)
        orbit = np.array(orbit)
        olo, ohi = orbit.min(axis=0), orbit.max(axis=0)
        pad = np.maximum(0.4 * (ohi - olo), 0.5)
        lo, hi = tuple(olo - pad), tuple(ohi + pad)

    rng = np.random.default_rng(rng_seed)
    pts = rng.uniform(lo, hi, size=(n_seeds, 2))
    gone = np.zeros(n_seeds, dtype=bool)
    for _ in range(horizon):
        pts = step(system, pts)
        gone |= np.isnan(pts[:, 0])
        pts[gone] = 0.0
    rate = float(gone.mean())
    if rate > max_escape:
        raise ConstructionError(
            f"escape rate {rate:.3f} exceeds {max_escape} for box {lo}x{hi}",
            escape_rate=rate,
        )
    return TrappingRegion(tuple(map(float, lo)), tuple(map(float, hi)), rate, n_seeds, horizon)


@lru_cache(maxsize=16)
def default_trapping_region(system: Henon) -> TrappingRegion:
    return trapping_region(system)


def space_diameter(system) -> float:
    if isinstance(system, IntermittentCircle):
        return 0.5
    if isinstance(system, Doubling):
        return 1.0
    if isinstance(system, IntermittentSolenoid):
        return 2.0
    if isinstance(system, Henon):
        lo, hi = CLASSICAL_BOX if (system.a, system.b) == (1.4, 0.3) else ((-2.0, -1.0), (2.0, 1.0))
        return float(np.hypot(hi[0] - lo[0], hi[1] - lo[1]))
    raise UsageError(f"unknown system {system!r}")


def uniform_sample(system, rng, n):
    """Uniform draw from the phase space (trapping box for Hénon)."""
    if isinstance(system, Henon):
        return default_trapping_region(system).sample(rng, n)
    if system.dim == 1:
        return rng.random(n)
    r = np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    return np.stack([rng.random(n), r * np.cos(th), r * np.sin(th)], axis=-1)


def system_to_dict(system) -> dict:
    if isinstance(system, Henon):
        return {"kind": "henon", "a": system.a, "b": system.b}
    if isinstance(system, IntermittentCircle):
        return {"kind": "intermittent_circle", "gamma": system.gamma, "d": system.d}
    if isinstance(system, IntermittentSolenoid):
        return {"kind": "intermittent_solenoid", "gamma": system.gamma, "d": system.d}
    if isinstance(system, Doubling):
        return {"kind": "doubling"}
    raise UsageError(f"unknown system {system!r}")


def system_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "henon":
        return Henon(float(spec.get("a", 1.4)), float(spec.get("b", 0.3)))
    if kind == "intermittent_circle":
        return IntermittentCircle(float(spec.get("gamma", 0.5)), int(spec.get("d", 2)))
    if kind == "intermittent_solenoid":
        return IntermittentSolenoid(float(spec.get("gamma", 0.5)), int(spec.get("d", 2)))
    if kind == "doubling":
        return Doubling()
    raise UsageError(f"unknown system kind {kind!r}")
