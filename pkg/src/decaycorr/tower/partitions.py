"""
Interval calculus on induced towers and the join partitions.

A point's forward itinerary under a full-branch circle map is its sequence of
branch indices; ``Lam`` is exactly the domain of branch ``d - 1``, so every
set of the form "points whose next steps follow branches b_0 .. b_{L-1} and
then land in ``Lam``" is an interval, obtained by pulling ``Lam`` back through
the inverse branches in reverse time order. Cylinders of the induced map,
elements of the join partitions and their forward images are all of this form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import systems as sysm
from ..errors import ConstructionError, UsageError
from .model import TowerModel, pull_interval, return_map

DEFAULT_MAX_ELEMENTS = 1_000_000


def _require_induced(tower: TowerModel):
    if tower.kind != "induced":
        raise UsageError("this operation needs an induced tower")


def pull_ragged(system, flat_ops, offsets, lengths, lo, w):
    """Apply per-sample branch sequences to intervals, last op first.

    Sample ``i`` owns ``flat_ops[offsets[i] : offsets[i] + lengths[i]]`` in
    time order; its interval ``[lo[i], lo[i] + w[i])`` is pulled back through
    the inverse of each op starting from the final one.
    """
    lo = np.array(lo, dtype=float, copy=True)
    w = np.array(w, dtype=float, copy=True)
    offsets = np.asarray(offsets, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size == 0 or lengths.max(initial=0) == 0:
        return lo, w
    order = np.argsort(-lengths, kind="stable")
    sorted_len = lengths[order]
    n_active = np.searchsorted(-sorted_len, 0, side="left")  # samples with length > 0
    j = 0
    while n_active > 0:
        act = order[:n_active]
        ops = flat_ops[offsets[act] + lengths[act] - 1 - j]
        for b in np.unique(ops):
            sel = act[ops == b]
            lo[sel], w[sel] = pull_interval(system, int(b), lo[sel], w[sel])
        j += 1
        n_active = np.searchsorted(-sorted_len, -j, side="left")
    return lo, w


# --------------------------------------------------------------------------- #
# symbolic itineraries of nodes and cells
# --------------------------------------------------------------------------- #

def node_ops(tower: TowerModel, node: int) -> np.ndarray:
    """Time-ordered branch indices a point of ``node`` follows before reaching ``Lam``."""
    st = tower.structure
    node = int(node)
    cached = st.ops_cache.get(node)
    if cached is not None:
        return cached
    ops, n = [], node
    while n > 0:
        ops.append(st.node_branch[n])
        n = st.node_parent[n]
    out = np.array(ops, dtype=np.int8)
    out.setflags(write=False)
    if len(st.ops_cache) < 65536:
        st.ops_cache[node] = out
    return out


def cell_ops(tower: TowerModel, cell: int) -> np.ndarray:
    """Branch sequence of a cell: one step in ``Lam`` then its node's sequence."""
    d = tower.structure.d
    return np.concatenate([[d - 1], node_ops(tower, tower.cell_node[cell])]).astype(np.int8)


def cylinder_ops(tower: TowerModel, cells) -> np.ndarray:
    """Concatenated branch sequence of the induced cylinder ``[c_0; c_1, ..., c_r]``."""
    if len(cells) == 0:
        return np.zeros(0, dtype=np.int8)
    return np.concatenate([cell_ops(tower, c) for c in cells]).astype(np.int8)


def cylinder_interval(tower: TowerModel, cells):
    """Interval ``(lo, width)`` of the induced cylinder ``[c_0; c_1, ..., c_r]`` inside ``Lam``."""
    _require_induced(tower)
    cells = [int(c) for c in cells]
    if not cells:
        lam_lo, _ = tower.structure.lam
        return lam_lo, 1.0 / tower.structure.d
    last = cells[-1]
    ops = cylinder_ops(tower, cells[:-1])
    lo, w = pull_ragged(tower.system, ops, [0], [len(ops)], [tower.lo[last]], [tower.width[last]])
    return float(lo[0]), float(w[0])


def _position(tower, cells, t):
    """Locate time ``t`` along the itinerary: returns ``(q, s)`` with ``S_q <= t < S_{q+1}``."""
    S = 0
    for q, c in enumerate(cells):
        R = int(tower.R[c])
        if t < S + R:
            return q, t - S
        S += R
    raise UsageError(f"time {t} lies beyond the itinerary's last return")


def image_interval(tower: TowerModel, cells, t: int):
    """Interval ``f^t([c_0; c_1, ..., c_r])`` for ``0 <= t < S_{r+1}``.

    At time ``t`` the points sit ``s`` steps into the excursion of ``c_q``;
    the image is the set of points following the rest of that excursion and
    then the cylinder ``[c_{q+1}, ..., c_r]``.
    """
    _require_induced(tower)
    cells = [int(c) for c in cells]
    q, s = _position(tower, cells, int(t))
    ops_here = cell_ops(tower, cells[q])[s:]
    rest = cells[q + 1:]
    if not rest:
        if s == 0:
            c = cells[q]
            return float(tower.lo[c]), float(tower.width[c])
        node = _ancestor(tower, tower.cell_node[cells[q]], s - 1)
        st = tower.structure
        return float(st.node_lo[node]), float(st.node_width[node])
    ops = np.concatenate([ops_here, cylinder_ops(tower, rest[:-1])]).astype(np.int8)
    last = rest[-1]
    lo, w = pull_ragged(tower.system, ops, [0], [len(ops)], [tower.lo[last]], [tower.width[last]])
    return float(lo[0]), float(w[0])


def _ancestor(tower, node, up):
    par = tower.structure.node_parent
    for _ in range(up):
        node = par[node]
    return int(node)


# --------------------------------------------------------------------------- #
# join partitions
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class PartitionElement:
    """One element of ``Q_k`` or ``P_n``.

    ``cells`` is the revealed itinerary (first entry is the base cell);
    ``level`` is the tower level (always 0 for ``Q_k``); ``lo, width`` give
    the base interval of induced towers; ``mass`` is its base measure.
    """

    cells: tuple
    level: int
    mass: float
    lo: Optional[float] = None
    width: Optional[float] = None

    def contains(self, other: "PartitionElement") -> bool:
        """Whether ``other`` (from a finer partition) lies inside this element."""
        return (other.level == self.level
                and other.cells[: len(self.cells)] == self.cells)


def _cell_mass(tower):
    return tower.weights / tower.cell_mass


def q_partition_size(tower: TowerModel, k: int) -> int:
    return tower.n_cells ** (k + 1)


def p_partition_size(tower: TowerModel, n: int) -> int:
    """Number of ``P_n`` elements over the enumerated cells (exact integer count)."""
    horizon = max(int(n) - 1, 0)
    R = [int(r) for r in tower.R]
    counts = {}
    for t in range(horizon, 0, -1):  # continuations after a return revealed at time t
        counts[t] = sum(counts[t + r] if t + r <= horizon else 1 for r in R)
    prefix = [0] * (horizon + 1)
    for t in range(1, horizon + 1):
        prefix[t] = prefix[t - 1] + counts[t]
    total = 0
    for r in R:
        # one element per level; the first return comes t1 = r - level steps later
        total += prefix[min(r, horizon)] + max(0, r - horizon)
    return total


def refine_partition(tower: TowerModel, k: int, kind: str = "Q",
                     max_elements: int = DEFAULT_MAX_ELEMENTS, with_intervals: bool = True):
    """Enumerate ``Q_k`` (base cylinders with ``k`` returns revealed) or ``P_n``.

    ``P_n`` is the join of the level partition over times ``0 .. n-1``; an
    element is a base cell, a level and the cells entered by time ``n - 1``.
    ``P_0`` and ``P_1`` both equal the level partition.
    """
    k = int(k)
    if k < 0:
        raise UsageError("partition index must be >= 0")
    if kind not in ("Q", "P"):
        raise UsageError("kind must be 'Q' or 'P'")
    size = q_partition_size(tower, k) if kind == "Q" else p_partition_size(tower, k)
    if size > max_elements:
        raise ConstructionError(
            f"{kind}_{k} has {size} elements, above the budget {max_elements}", attempted=size
        )
    mass = _cell_mass(tower)
    induced = tower.kind == "induced" and with_intervals
    out = []
    if kind == "Q":
        for cells in _products(tower.n_cells, k + 1):
            m = math.prod(float(mass[c]) for c in cells)
            lo = w = None
            if induced:
                lo, w = cylinder_interval(tower, cells)
                m = w * tower.structure.d / tower.cell_mass
            out.append(PartitionElement(cells, 0, m, lo, w))
        return out
    horizon = max(k - 1, 0)
    for c0 in range(tower.n_cells):
        R0 = int(tower.R[c0])
        for level in range(R0):
            for cells in _revealed(tower, (c0,), R0 - level, horizon):
                m = math.prod(float(mass[c]) for c in cells)
                lo = w = None
                if induced:
                    lo, w = cylinder_interval(tower, cells)
                    m = w * tower.structure.d / tower.cell_mass
                out.append(PartitionElement(cells, level, m, lo, w))
    return out


def _products(n, r):
    if r == 0:
        yield ()
        return
    for head in _products(n, r - 1):
        for c in range(n):
            yield head + (c,)


def _revealed(tower, prefix, t_next, horizon):
    if t_next > horizon:
        yield prefix
        return
    for c in range(tower.n_cells):
        yield from _revealed(tower, prefix + (c,), t_next + int(tower.R[c]), horizon)


# --------------------------------------------------------------------------- #
# separation time
# --------------------------------------------------------------------------- #

def separation_time(tower: TowerModel, x, y, max_returns: int = 64):
    """Number of returns before ``x`` and ``y`` (points of ``Lam``) lie in different cells.

    ``s = 0`` when the base cells differ; the count stops at ``max_returns``
    and at points that fall into the truncated remainder.
    """
    _require_induced(tower)
    x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    y = np.atleast_1d(np.asarray(y, dtype=float)).copy()
    s = np.zeros(x.shape, dtype=np.int64)
    alive = np.ones(x.shape, dtype=bool)
    for _ in range(int(max_returns)):
        cx, cy = tower.locate(x), tower.locate(y)
        same = alive & (cx == cy) & (cx >= 0)
        alive = same
        if not alive.any():
            break
        s[alive] += 1
        idx = np.flatnonzero(alive)
        x[idx] = return_map(tower, x[idx])
        y[idx] = return_map(tower, y[idx])
    return s
