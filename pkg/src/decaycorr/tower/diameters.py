"""
Diameter sequences, piecewise-constant approximants and the distortion check.

Notation: a *node* with hitting time ``m`` is a maximal interval whose points
first reach ``Lam`` after exactly ``m`` steps; base cells are the nodes' ``Lam``
preimages and have hitting time ``R``. The forward images ``f^l(Q)`` of a base
cell are its ancestor nodes, and the image of a sub-cylinder of ``Q`` inside a
node ``M`` is the pullback into ``M`` of a cylinder of the induced map.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import systems as sysm
from ..errors import UsageError
from ..observables import Observable, eval_observable
from .model import TowerModel, pull_interval, return_map
from .orbits import TowerPath, path_image_intervals
from .partitions import cell_ops, image_interval, node_ops, pull_ragged, separation_time

log = logging.getLogger(__name__)


def _require_induced(tower):
    if tower.kind != "induced":
        raise UsageError("diameter sequences need an induced tower")


# --------------------------------------------------------------------------- #
# delta_bar
# --------------------------------------------------------------------------- #

def _suffix_node_widths(tower, k_max):
    """``A[k] = max |M|`` over nodes and cells with hitting time ``> k``."""
    st = tower.structure
    m_all = np.concatenate([st.node_m[1:], tower.R])
    w_all = np.concatenate([st.node_width[1:], tower.width])
    top = int(m_all.max())
    best = np.zeros(top + 2)
    np.maximum.at(best, m_all, w_all)
    suffix = np.maximum.accumulate(best[::-1])[::-1]  # suffix[m] = max over hitting time >= m
    A = np.zeros(k_max + 1)
    ks = np.arange(k_max + 1)
    inside = ks + 1 <= top
    A[inside] = suffix[ks[inside] + 1]
    return A


def cylinder_beam(tower: TowerModel, j_max: int, width: int):
    """Widest induced cylinders of each depth ``1 .. j_max`` (beam search).

    Depth-``j`` candidates prepend one of the ``width`` widest cells to each
    depth-``(j-1)`` beam member; the ``width`` widest survive. Returns arrays
    ``lo, w`` of shape ``(j_max + 1, width)``; row 0 is unused.
    """
    width = int(min(width, tower.n_cells))
    order = np.argsort(-tower.width, kind="stable")[:width]
    lo = np.zeros((j_max + 1, width))
    w = np.zeros((j_max + 1, width))
    lo[1], w[1] = tower.lo[order], tower.width[order]
    ops = [cell_ops(tower, c) for c in order]
    flat = np.concatenate(ops).astype(np.int8)
    offs = np.concatenate([[0], np.cumsum([len(o) for o in ops])[:-1]])
    lens = np.array([len(o) for o in ops])
    for j in range(2, j_max + 1):
        if w[j - 1, 0] == 0.0:
            break
        # candidate (a, b): cell order[a] applied to beam member b
        a_idx = np.repeat(np.arange(width), width)
        b_idx = np.tile(np.arange(width), width)
        c_lo, c_w = pull_ragged(tower.system, flat, offs[a_idx], lens[a_idx],
                                lo[j - 1, b_idx], w[j - 1, b_idx])
        keep = np.argsort(-c_w, kind="stable")[:width]
        lo[j], w[j] = c_lo[keep], c_w[keep]
    return lo, w


def delta_bar_sequence(tower: TowerModel, k_max: int, sample_budget: int = 32):
    """Estimates of ``delta_bar_k`` for ``k = 0 .. k_max``.

    For a base cell ``Q`` and ``0 <= l < R(Q)`` the relevant set is either the
    whole image ``f^l(Q)`` (when its hitting time ``R(Q) - l`` exceeds ``k``)
    or the image of a sub-cylinder revealing ``j = k + 1 - (R(Q) - l)`` further
    cells. Hence

        delta_bar_k = max( max_{M: m(M) > k} |M|,  max_{M: m(M) <= k} W(M, k + 1 - m(M)) )

    over nodes and cells ``M``, with ``W(M, j)`` the widest pullback into ``M``
    of a depth-``j`` induced cylinder. ``W`` is a maximum over a beam of
    ``sample_budget`` candidate cylinders per depth, so it is a lower estimate.
    """
    _require_induced(tower)
    k_max = int(k_max)
    if k_max < 0:
        raise UsageError("k_max must be >= 0")
    st = tower.structure
    if int(st.node_m.max()) + 1 < k_max:
        log.warning("tower depth %d is below k_max %d; deep terms are missing",
                    int(st.node_m.max()) + 1, k_max)
    A = _suffix_node_widths(tower, k_max)
    B = np.zeros(k_max + 1)
    if k_max >= 1:
        beam_lo, beam_w = cylinder_beam(tower, k_max, sample_budget)
        d = st.d
        arrays = {0: (beam_lo[1:], beam_w[1:])}  # root: rows are j = 1 .. k_max
        n_nodes = len(st.node_m)
        cells_of = {}
        for c, nd in enumerate(tower.cell_node):
            cells_of.setdefault(int(nd), []).append(c)
        current_depth = 0
        for nid in range(n_nodes):
            m = int(st.node_m[nid])
            if m > k_max:
                break
            if m != current_depth:
                # drop arrays two levels up; parents of this depth are one level up
                for key in [key for key in arrays if st.node_m[key] < m - 1]:
                    del arrays[key]
                current_depth = m
            if nid > 0:
                p_lo, p_w = arrays[int(st.node_parent[nid])]
                J = k_max + 1 - m
                lo, w = pull_interval(tower.system, int(st.node_branch[nid]), p_lo[:J], p_w[:J])
                arrays[nid] = (lo, w)
                Wmax = w.max(axis=1)
                B[m: m + J] = np.maximum(B[m: m + J], Wmax)
            lo_n, w_n = arrays[nid]
            # cells hanging below this node have hitting time m + 1
            if nid in cells_of and m + 1 <= k_max:
                J = k_max - m
                Wc = w_n[:J].max(axis=1) / d
                B[m + 1: m + 1 + J] = np.maximum(B[m + 1: m + 1 + J], Wc)
    return np.maximum(A, B)


def delta_bar(tower: TowerModel, k: int, sample_budget: int = 32) -> float:
    return float(delta_bar_sequence(tower, k, sample_budget)[int(k)])


# --------------------------------------------------------------------------- #
# delta_n by sampling P in P_{2n}
# --------------------------------------------------------------------------- #

def _draw_mixed(tower, rng, size):
    """Half by base weight, half uniform over the enumerated cells."""
    cdf = np.cumsum(tower.weights)
    by_w = np.minimum(np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right"), tower.n_cells - 1)
    unif = rng.integers(0, tower.n_cells, size)
    return np.where(rng.random(size) < 0.5, by_w, unif)


def sample_p_elements(tower: TowerModel, n: int, count: int, rng):
    """Random elements of ``P_{2n}``: ``(cells, level)`` itineraries."""
    horizon = max(2 * int(n) - 1, 0)
    c0s = _draw_mixed(tower, rng, count)
    out = []
    for c0 in c0s:
        R0 = int(tower.R[c0])
        level = int(rng.integers(0, R0))
        cells = [int(c0)]
        t_next = R0 - level
        while t_next <= horizon:
            c = int(_draw_mixed(tower, rng, 1)[0])
            cells.append(c)
            t_next += int(tower.R[c])
        out.append((tuple(cells), level))
    return out


def image_intervals(tower: TowerModel, elements, t_offset: int):
    """Vectorized :func:`image_interval` for ``(cells, level)`` pairs at time ``level + t_offset``."""
    st = tower.structure
    starts_lo, starts_w, ops_list = [], [], []
    for cells, level in elements:
        t = level + t_offset
        S, q = 0, 0
        while t >= S + int(tower.R[cells[q]]):
            S += int(tower.R[cells[q]])
            q += 1
        s = t - S
        rest = cells[q + 1:]
        if not rest:
            if s == 0:
                starts_lo.append(tower.lo[cells[q]])
                starts_w.append(tower.width[cells[q]])
            else:
                node = int(tower.cell_node[cells[q]])
                for _ in range(s - 1):
                    node = int(st.node_parent[node])
                starts_lo.append(st.node_lo[node])
                starts_w.append(st.node_width[node])
            ops_list.append(np.zeros(0, dtype=np.int8))
            continue
        parts = [cell_ops(tower, cells[q])[s:]] + [cell_ops(tower, c) for c in rest[:-1]]
        ops_list.append(np.concatenate(parts).astype(np.int8))
        starts_lo.append(tower.lo[rest[-1]])
        starts_w.append(tower.width[rest[-1]])
    lens = np.array([len(o) for o in ops_list], dtype=np.int64)
    offs = np.concatenate([[0], np.cumsum(lens)[:-1]]) if len(lens) else np.zeros(0, dtype=np.int64)
    flat = np.concatenate(ops_list).astype(np.int8) if ops_list else np.zeros(0, dtype=np.int8)
    return pull_ragged(tower.system, flat, offs, lens, starts_lo, starts_w)


def delta_n(tower: TowerModel, n: int, sample_budget: int = 4096, rng_seed: int = 0) -> float:
    """Lower estimate of ``delta_n = sup diam pi(F^n(P))`` over ``P`` in ``P_{2n}``.

    ``sample_budget`` elements are drawn (base cell half by weight, half
    uniformly; uniform level; revealed cells likewise) and the largest image
    diameter is returned.
    """
    _require_induced(tower)
    n = int(n)
    if n < 0:
        raise UsageError("n must be >= 0")
    rng = np.random.default_rng(rng_seed)
    elements = sample_p_elements(tower, n, int(sample_budget), rng)
    if not elements:
        raise UsageError("empty partition sample")
    _, w = image_intervals(tower, elements, n)
    log.debug("delta_n(%d): %d sampled elements", n, len(elements))
    return float(min(np.max(w), 0.5))


# --------------------------------------------------------------------------- #
# piecewise-constant approximants
# --------------------------------------------------------------------------- #

def interval_inf(obs: Observable, lo, hi):
    """``inf`` of a one-dimensional observable over ``[lo, hi]``.

    Exact for the fixed kinds: the infimum sits at an endpoint or at one of the
    critical points of the kind. Sums fall back to a 65-point grid.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if obs.system.dim != 1:
        raise UsageError("interval infima need a one-dimensional system")
    k = obs.kind
    if k == "constant":
        return np.full(lo.shape, obs.scale * obs.value)
    best = np.minimum(eval_observable(obs, np.clip(lo, 0, np.nextafter(1.0, 0))),
                      eval_observable(obs, np.clip(hi, 0, np.nextafter(1.0, 0))))
    if k in ("sawtooth", "coordinate"):
        # monotone on [0, 1)
        if obs.scale >= 0:
            return np.asarray(eval_observable(obs, np.clip(lo, 0, 1)), dtype=float)
        return best
    if k == "radial":
        a = obs.anchor[0]
        crit = [a - 1, a - 0.5, a, a + 0.5, a + 1]
    elif k == "cos":
        crit = [0.0, 0.5, 1.0]
    else:
        grid = lo[..., None] + (hi - lo)[..., None] * np.linspace(0, 1, 65)
        vals = eval_observable(obs, np.clip(grid, 0, np.nextafter(1.0, 0)))
        return np.minimum(best, vals.min(axis=-1))
    for c in crit:
        inside = (lo <= c) & (c <= hi)
        if inside.any():
            val = eval_observable(obs, np.array([c - np.floor(c)]))[0]
            best = np.where(inside, np.minimum(best, val), best)
    return best


@dataclass
class DiscretizedObservable:
    """``phi_bar_k``: on each ``P`` in ``P_{2k}`` the infimum of ``phi`` over ``pi(F^k(P))``."""

    tower: TowerModel
    obs: Observable
    k: int

    def on_path(self, path: TowerPath):
        """Values and image diameters along an induced path (NaN where unavailable)."""
        lo, w = path_image_intervals(self.tower, path, self.k)
        vals = np.full(lo.shape, np.nan)
        ok = np.isfinite(lo)
        vals[ok] = interval_inf(self.obs, lo[ok], lo[ok] + w[ok])
        return vals, w

    def on_elements(self, elements):
        """Values for ``P_{2k}`` elements given as ``(cells, level)`` or PartitionElement."""
        pairs = [(e.cells, e.level) if hasattr(e, "cells") else e for e in elements]
        lo, w = image_intervals(self.tower, pairs, self.k)
        return interval_inf(self.obs, lo, lo + w), w

    @property
    def sup_norm_bound(self) -> float:
        return self.obs.sup_norm


def discretize_observable(tower: TowerModel, obs: Observable, k: int) -> DiscretizedObservable:
    _require_induced(tower)
    if obs.system != tower.system:
        raise UsageError("observable and tower live on different systems")
    if int(k) < 0:
        raise UsageError("k must be >= 0")
    return DiscretizedObservable(tower, obs, int(k))


# --------------------------------------------------------------------------- #
# bounded distortion
# --------------------------------------------------------------------------- #

@dataclass
class DistortionReport:
    max_ratio: float
    C: float
    beta: float
    n_pairs: int
    discarded: int
    holds: bool
    per_separation: dict = field(default_factory=dict)


def log_return_derivative(tower: TowerModel, z, cells):
    """``log |(f^R)'(z)|`` and ``f^R(z)`` for base points ``z`` in the given cells."""
    system = tower.system
    z = np.asarray(z, dtype=float)
    R = tower.R[cells]
    order = np.argsort(-R, kind="stable")
    x = z[order].copy()
    Rs = R[order]
    acc = np.zeros(len(z))
    for j in range(int(Rs.max(initial=0))):
        n_act = int(np.searchsorted(-Rs, -j, side="left"))
        act = slice(0, n_act)
        acc[act] += np.log(sysm.base_derivative(system, x[act]))
        x[act] = sysm.step(system, x[act])
    out_acc = np.empty_like(acc)
    out_x = np.empty_like(x)
    out_acc[order] = acc
    out_x[order] = x
    return out_acc, out_x


def distortion_check(tower: TowerModel, pairs: int = 100_000, rng_seed: int = 0,
                     max_returns: int = 48) -> DistortionReport:
    """Empirical bounded-distortion envelope ``|log (f^R)'(x)/(f^R)'(y)| <= C beta^s``.

    ``s`` is the separation time of ``f^R(x)`` and ``f^R(y)``. Pairs are drawn
    uniformly inside a common cell chosen by base weight; ``beta`` is fitted to
    the per-separation maxima and ``C`` is the smallest constant making the
    envelope hold on every pair. Pairs whose image leaves ``Lam`` through
    rounding are discarded and counted.
    """
    _require_induced(tower)
    rng = np.random.default_rng(rng_seed)
    pairs = int(pairs)
    cdf = np.cumsum(tower.weights)
    cells = np.minimum(np.searchsorted(cdf, rng.random(pairs) * cdf[-1], side="right"), tower.n_cells - 1)
    x = tower.lo[cells] + rng.random(pairs) * tower.width[cells]
    y = tower.lo[cells] + rng.random(pairs) * tower.width[cells]
    lx, fx = log_return_derivative(tower, x, cells)
    ly, fy = log_return_derivative(tower, y, cells)
    lam_lo, _ = tower.structure.lam
    good = (fx >= lam_lo) & (fy >= lam_lo) & np.isfinite(lx) & np.isfinite(ly)
    ratio = np.abs(lx - ly)[good]
    s = separation_time(tower, fx[good], fy[good], max_returns=max_returns)
    per = {}
    for sv in np.unique(s):
        per[int(sv)] = float(ratio[s == sv].max())
    max_ratio = float(ratio.max(initial=0.0))
    if max_ratio == 0.0:
        return DistortionReport(0.0, 0.0, float("nan"), int(good.sum()), int((~good).sum()), True, per)
    sv = np.array([k for k, v in per.items() if v > 0], dtype=float)
    mv = np.array([per[int(k)] for k in sv])
    if len(sv) >= 2:
        slope = np.polyfit(sv, np.log(mv), 1)[0]
        beta = float(np.exp(slope))
    else:
        beta = float("nan")
    if np.isfinite(beta) and beta < 1:
        C = float(np.max(ratio / beta ** s))
        holds = True
    else:
        C = max_ratio
        holds = len(sv) < 2
    return DistortionReport(max_ratio, C, beta, int(good.sum()), int((~good).sum()), holds, per)
