"""
Young towers over a base of cells with return times.

Two constructions share one :class:`TowerModel`:

* ``induced``: first-return inducing of a one-dimensional full-branch circle
  map (the intermittent map or the doubling map) on its rightmost affine branch
  domain ``Lam = [(d-1)/d, 1)``. The points of ``[0, 1)`` that first reach
  ``Lam`` after exactly ``m`` steps form a tree of intervals ("nodes", the root
  being ``Lam`` itself with ``m = 0``); each node ``N`` has one child per
  non-``Lam`` branch, and its preimage under the ``Lam`` branch is a base cell
  with return time ``m + 1``.
* ``synthetic``: an abstract full shift with i.i.d. cell selection and a
  prescribed return-time law.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional

import numpy as np

from .. import systems as sysm
from ..errors import ConstructionError, UsageError
from .laws import ExpTail, PolyTail, StretchedTail

MIN_CELL_WIDTH = 1e-13


@dataclass
class InducedStructure:
    """Interval data of an induced tower; all arrays indexed by node id (root = 0)."""

    d: int
    node_lo: np.ndarray
    node_hi: np.ndarray
    node_width: np.ndarray
    node_m: np.ndarray
    node_branch: np.ndarray
    node_parent: np.ndarray
    # pullbacks of Lam through m neutral-branch inverses: [run_lo[m], run_lo[m] + run_width[m])
    run_lo: np.ndarray
    run_width: np.ndarray
    ops_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def lam(self):
        return (self.d - 1) / self.d, 1.0


@dataclass
class TowerModel:
    kind: str
    R: np.ndarray
    weights: np.ndarray
    remainder: float
    system: object = None
    law: object = None
    branching: int = 1
    cutoff: int = 0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    width: Optional[np.ndarray] = None
    cell_node: Optional[np.ndarray] = None
    structure: Optional[InducedStructure] = None
    symbol: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.R.size == 0:
            raise ConstructionError("tower has no cells")
        if np.any(self.R < 1):
            raise ConstructionError("return times must be >= 1")
        g = reduce(math.gcd, np.unique(self.R).tolist())
        if g != 1:
            raise ConstructionError(f"return times are not aperiodic: gcd = {g}")
        if not np.isfinite(self.kac_mass):
            raise ConstructionError("Kac mass sum R_i m_i is not finite")

    @property
    def n_cells(self) -> int:
        return int(self.R.size)

    @property
    def d(self) -> int:
        return self.structure.d if self.structure is not None else 0

    @property
    def cell_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    @property
    def kac_mass(self) -> float:
        """``sum_i R_i m(Lam_i)`` over the enumerated cells, base mass normalized to 1."""
        return math.fsum((self.R * self.weights).tolist()) / self.cell_mass

    @property
    def max_return(self) -> int:
        return int(self.R.max())

    def return_law(self) -> np.ndarray:
        """``p[k] = m{R = k}`` for ``k = 0..max_return`` with cells normalized to mass 1."""
        p = np.bincount(self.R, weights=self.weights, minlength=self.max_return + 1)
        return p / self.cell_mass

    def tail(self, include_remainder: bool = True) -> np.ndarray:
        """``t[n] = m{R > n}`` for ``n = 0..max_return``.

        With ``include_remainder`` the mass lost to depth truncation counts as
        ``R > max_return`` and the base is normalized to total mass 1;
        otherwise the enumerated cells are normalized to mass 1.
        """
        p = np.bincount(self.R, weights=self.weights, minlength=self.max_return + 1)
        t = np.cumsum(p[::-1])[::-1]
        t = np.append(t[1:], 0.0)
        if include_remainder:
            return t + self.remainder
        return t / self.cell_mass

    def locate(self, z):
        """Cell index of base points ``z`` (``-1`` when outside every enumerated cell)."""
        if self.kind != "induced":
            raise UsageError("locate needs an induced tower")
        z = np.asarray(z, dtype=float)
        idx = np.searchsorted(self.lo, z, side="right") - 1
        ok = (idx >= 0) & (z < self.hi[np.maximum(idx, 0)])
        return np.where(ok, idx, -1)


@dataclass(frozen=True)
class TowerState:
    cell: int
    level: int
    z: Optional[float] = None

    @property
    def in_remainder(self) -> bool:
        return self.cell < 0


# --------------------------------------------------------------------------- #
# induced construction
# --------------------------------------------------------------------------- #

def pull_interval(system, b: int, lo, w):
    """Pull the interval ``[lo, lo + w)`` back through the inverse of branch ``b``.

    Returns ``(lo', w')``. Affine branches are exact; for the neutral branch
    narrow intervals use the mean-value form ``w / f'(mid)`` so that widths far
    below the endpoint magnitude keep full relative precision.
    """
    d = system.d
    lo = np.asarray(lo, dtype=float)
    w = np.asarray(w, dtype=float)
    if b != 0:
        return (lo + b) / d, w / d
    hi = lo + w
    new_lo = sysm.left_branch_inverse(system, lo)
    new_hi = np.where(hi >= 1.0, 1.0 / d, sysm.left_branch_inverse(system, np.minimum(hi, 1.0)))
    diff = new_hi - new_lo
    narrow = w < 1e-5 * np.maximum(lo, 1e-300)
    if np.any(narrow):
        mid = sysm.left_branch_inverse(system, lo + 0.5 * w)
        diff = np.where(narrow, w / sysm.base_derivative(system, mid), diff)
    if lo.ndim == 0:
        return float(new_lo), float(diff)
    return new_lo, diff


def build_induced_tower(system, depth: int, min_width: float = MIN_CELL_WIDTH,
                        max_nodes: int = 2_000_000, remainder_threshold: float = 1e-3):
    """First-return tower of an intermittent (or doubling) circle map over ``Lam``.

    Cells are enumerated breadth-first up to return time ``depth``; cells
    narrower than ``min_width`` and all deeper cells are lumped into the
    reported ``remainder`` mass.
    """
    if not isinstance(system, (sysm.IntermittentCircle, sysm.Doubling)):
        raise UsageError("induced towers need an IntermittentCircle or Doubling base map")
    depth = int(depth)
    if depth < 1:
        raise UsageError("depth must be >= 1")
    d = system.d
    lam_lo, lam_hi = (d - 1) / d, 1.0
    lam_width = 1.0 / d

    node_lo, node_hi, node_width = [lam_lo], [lam_hi], [lam_width]
    node_m, node_branch, node_parent = [0], [-1], [-1]
    cells = []  # (lo, hi, width, R, node)
    frontier = [0]
    m = 0
    while frontier and m < depth:
        nxt = []
        for nid in frontier:
            lo, hi, w = node_lo[nid], node_hi[nid], node_width[nid]
            cw = w / d
            if cw < min_width:
                continue
            cells.append(((lo + d - 1) / d, (lo + d - 1) / d + cw, cw, m + 1, nid))
            if m + 1 >= depth:
                continue
            for b in range(d - 1):
                clo, cwid = pull_interval(system, b, lo, w)
                node_lo.append(clo)
                node_hi.append(clo + cwid)
                node_width.append(cwid)
                node_m.append(m + 1)
                node_branch.append(b)
                node_parent.append(nid)
                nxt.append(len(node_lo) - 1)
                if len(node_lo) > max_nodes:
                    raise ConstructionError(
                        f"induced tower enumeration exceeded {max_nodes} nodes at depth {m + 1}; "
                        "raise min_width or lower depth",
                        attempted=len(node_lo),
                    )
        frontier = nxt
        m += 1

    cells.sort(key=lambda c: c[0])
    lo = np.array([c[0] for c in cells])
    hi = np.array([c[1] for c in cells])
    width = np.array([c[2] for c in cells])
    R = np.array([c[3] for c in cells], dtype=np.int64)
    cell_node = np.array([c[4] for c in cells], dtype=np.int64)
    weights = width / lam_width
    remainder = max(0.0, 1.0 - math.fsum(weights.tolist()))

    run_lo, run_width = [lam_lo], [lam_width]
    for _ in range(depth):
        a, b = pull_interval(system, 0, run_lo[-1], run_width[-1])
        run_lo.append(a)
        run_width.append(b)

    structure = InducedStructure(
        d=d,
        node_lo=np.array(node_lo), node_hi=np.array(node_hi), node_width=np.array(node_width),
        node_m=np.array(node_m, dtype=np.int64), node_branch=np.array(node_branch, dtype=np.int64),
        node_parent=np.array(node_parent, dtype=np.int64),
        run_lo=np.array(run_lo), run_width=np.array(run_width),
    )
    tower = TowerModel(
        kind="induced", R=R, weights=weights, remainder=remainder, system=system,
        cutoff=depth, lo=lo, hi=hi, width=width, cell_node=cell_node, structure=structure,
        meta={"depth": depth, "min_width": min_width, "n_nodes": len(node_lo)},
    )
    if remainder > remainder_threshold:
        warnings.warn(f"induced tower remainder mass {remainder:.3g} exceeds {remainder_threshold}")
    return tower


# --------------------------------------------------------------------------- #
# synthetic construction
# --------------------------------------------------------------------------- #

def synth_tower(law, branching: int = 2, cutoff: int = 100_000, max_truncation: float = 1e-3):
    """Tower over a full shift on ``branching`` symbols per return time.

    Each return-time class ``k`` gets total mass ``m{R = k}`` from ``law``,
    split evenly over its symbols; returns beyond ``cutoff`` are dropped and
    the remaining mass renormalized.
    """
    if not isinstance(law, (ExpTail, StretchedTail, PolyTail)):
        raise UsageError(f"unknown tail law {law!r}")
    branching = int(branching)
    if branching < 2:
        raise UsageError("branching must be >= 2")
    cutoff = int(cutoff)
    s = law.survival(np.arange(cutoff + 1))
    truncation = float(s[-1])
    if truncation > max_truncation:
        raise ConstructionError(
            f"truncation mass {truncation:.3g} at cutoff {cutoff} exceeds {max_truncation}",
            truncation=truncation,
        )
    p = (s[:-1] - s[1:]) / (1.0 - truncation)
    ks = np.arange(1, cutoff + 1)
    keep = p > 0
    ks, p = ks[keep], p[keep]
    R = np.repeat(ks, branching)
    weights = np.repeat(p / branching, branching)
    symbol = np.tile(np.arange(branching), len(ks))
    return TowerModel(
        kind="synthetic", R=R, weights=weights, remainder=0.0, law=law, branching=branching,
        cutoff=cutoff, symbol=symbol, meta={"truncation": truncation},
    )


# --------------------------------------------------------------------------- #
# dynamics on the tower
# --------------------------------------------------------------------------- #

def _check_state(tower, s: TowerState):
    if not 0 <= s.cell < tower.n_cells:
        raise UsageError(f"cell index {s.cell} out of range")
    if not 0 <= s.level < tower.R[s.cell]:
        raise UsageError(f"level {s.level} not in [0, R={tower.R[s.cell]})")
    if tower.kind == "induced" and s.z is None:
        raise UsageError("induced tower states need a base coordinate z")


def draw_cells(tower, rng, n):
    """``n`` i.i.d. cells from the normalized base measure."""
    cdf = np.cumsum(tower.weights)
    u = rng.random(n) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), tower.n_cells - 1)


def _snap_to_base(tower, x):
    """Clip rounded return values into ``Lam``; values that wrapped past 1 go to the top end."""
    lam_lo, _ = tower.structure.lam
    top = np.nextafter(1.0, 0.0)
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.5 * lam_lo, top, np.clip(x, lam_lo, top))


def return_map(tower, z):
    """``f^R(z)`` for base points ``z`` of an induced tower, clipped into ``Lam``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    cells = tower.locate(z)
    if np.any(cells < 0):
        raise UsageError("point outside the enumerated cells")
    out = z.copy()
    R = tower.R[cells]
    for j in range(int(R.max())):
        act = R > j
        out[act] = sysm.step(tower.system, out[act])
    return _snap_to_base(tower, out)


def tower_step(tower, s: TowerState, rng=None) -> TowerState:
    """One application of the tower map: climb a level, or return to the base."""
    _check_state(tower, s)
    if s.level + 1 < tower.R[s.cell]:
        return TowerState(s.cell, s.level + 1, s.z)
    if tower.kind == "synthetic":
        if rng is None:
            raise UsageError("synthetic towers need an rng to draw the next cell")
        return TowerState(int(draw_cells(tower, rng, 1)[0]), 0)
    z = float(_snap_to_base(tower, sysm.iterate(tower.system, s.z, int(tower.R[s.cell]))))
    return TowerState(int(tower.locate(z)), 0, z)


def project(tower, s: TowerState):
    """Projection to the circle: ``pi(z, l) = f^l(z)``."""
    if tower.kind != "induced":
        raise UsageError("synthetic towers have no ambient phase space")
    if s.z is None:
        raise UsageError("state needs a base coordinate")
    return float(sysm.iterate(tower.system, s.z, s.level))


def invariant_levels(tower) -> np.ndarray:
    """Level weights ``w_l = m{R > l} / sum_j m{R > j}`` of the invariant tower measure."""
    t = tower.tail(include_remainder=False)
    head = t[:-1]  # m{R > l} for l = 0..max_return-1
    total = math.fsum(head.tolist())
    if not np.isfinite(total) or total <= 0:
        raise ConstructionError("level weights are not normalizable")
    return head / total


def prefix_stopping_times(returns) -> np.ndarray:
    """``S_0 = 0, S_{i+1} = S_i + R_i`` for a sequence of visited return times."""
    return np.concatenate([[0], np.cumsum(np.asarray(returns, dtype=np.int64))])


def stopping_times(tower, s0: TowerState, k: int, rng=None):
    """Stopping times ``S_0..S_k`` of a base state.

    Returns ``(S, complete)``; ``complete`` is False when an induced orbit
    falls into the truncated remainder before ``k`` returns, in which case
    ``S`` holds the times reached so far.
    """
    _check_state(tower, s0)
    if s0.level != 0:
        raise UsageError("stopping times start from a base (level 0) state")
    returns, state = [], s0
    for _ in range(int(k)):
        if state.cell < 0:
            return prefix_stopping_times(returns), False
        returns.append(int(tower.R[state.cell]))
        if tower.kind == "synthetic":
            if rng is None:
                raise UsageError("synthetic towers need an rng")
            state = TowerState(int(draw_cells(tower, rng, 1)[0]), 0)
        else:
            state = tower_step(tower, TowerState(state.cell, int(tower.R[state.cell]) - 1, state.z))
    return prefix_stopping_times(returns), True


def sample_states(tower, rng, n: int):
    """``n`` induced tower states ``(cells, levels, z)`` with cells by weight, ``z`` uniform in the cell
    and the level uniform below ``R``."""
    if tower.kind != "induced":
        raise UsageError("states with base coordinates need an induced tower")
    cells = draw_cells(tower, rng, n)
    z = tower.lo[cells] + rng.random(n) * tower.width[cells]
    z = np.minimum(z, np.nextafter(tower.hi[cells], tower.lo[cells]))
    levels = np.floor(rng.random(n) * tower.R[cells]).astype(np.int64)
    return cells, levels, z


def semiconjugacy_defect(tower, n_states: int = 100_000, rng_seed: int = 0) -> float:
    """Largest ``d(f(pi(s)), pi(F(s)))`` over sampled states, relative to the circle length."""
    rng = np.random.default_rng(rng_seed)
    cells, levels, z = sample_states(tower, rng, int(n_states))
    R = tower.R[cells]
    x = z.copy()  # becomes pi(s) = f^level(z)
    for j in range(int(levels.max(initial=0))):
        act = levels > j
        x[act] = sysm.step(tower.system, x[act])
    lhs = sysm.step(tower.system, x)
    back = levels + 1 == R
    rhs = lhs.copy()
    if back.any():
        # F returns to the base: pi(F(s)) = f^R(z), the return map of the cell
        rhs[back] = return_map(tower, z[back])
    up = ~back
    if up.any():
        y = z[up].copy()
        lv = levels[up] + 1
        for j in range(int(lv.max())):
            act = lv > j
            y[act] = sysm.step(tower.system, y[act])
        rhs[up] = y
    return float(np.max(sysm.distance(tower.system, lhs, rhs)))
