"""
Orbits on towers and the intervals ``pi(F^k(P))`` along them.

Tower orbits are stored as :class:`TowerPath`: per-time cell index and level,
plus, for induced towers, the projected base orbit ``x_t = pi(F^t(state))``
and its branch indices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import systems as sysm
from ..errors import ConstructionError, UsageError
from .model import TowerModel, draw_cells, invariant_levels
from .partitions import pull_ragged

DOUBLING_BITS = 53
_DOUBLING_MASK = (1 << DOUBLING_BITS) - 1
_DOUBLING_SCALE = float(2.0 ** -DOUBLING_BITS)


# --------------------------------------------------------------------------- #
# base-map orbits
# --------------------------------------------------------------------------- #

def doubling_orbits(rng, n_chains: int, n_steps: int, state=None):
    """Orbits of the doubling map with ``53`` live binary digits.

    A float orbit of ``2x mod 1`` runs out of digits after 53 steps. Here each
    chain holds an integer ``k`` with ``x = k / 2**53``; a step shifts ``k``
    left and appends a fresh random digit, which is an exact sample of the
    doubling orbit of a uniformly distributed real seed.

    Returns ``(x, state)`` with ``x`` of shape ``(n_chains, n_steps + 1)`` and
    the final integer state for continuation.
    """
    if state is None:
        state = rng.integers(0, 1 << DOUBLING_BITS, size=n_chains, dtype=np.uint64)
    state = np.asarray(state, dtype=np.uint64).copy()
    out = np.empty((n_chains, n_steps + 1))
    out[:, 0] = state * _DOUBLING_SCALE
    mask = np.uint64(_DOUBLING_MASK)
    one = np.uint64(1)
    for t in range(1, n_steps + 1):
        bits = rng.integers(0, 2, size=n_chains, dtype=np.uint64)
        state = ((state << one) & mask) | bits
        out[:, t] = state * _DOUBLING_SCALE
    return out, state


def doubling_advance(rng, state, n_steps: int):
    """Advance integer doubling states without recording (burn-in)."""
    state = np.asarray(state, dtype=np.uint64).copy()
    mask = np.uint64(_DOUBLING_MASK)
    one = np.uint64(1)
    for _ in range(int(n_steps)):
        bits = rng.integers(0, 2, size=state.shape, dtype=np.uint64)
        state = ((state << one) & mask) | bits
    return state


def base_orbit(system, x0, n_steps: int):
    """Float orbit ``x_0 .. x_{n_steps}`` of a one-dimensional map (first axis = time)."""
    x = np.asarray(x0, dtype=float)
    out = np.empty((int(n_steps) + 1,) + x.shape)
    out[0] = x
    for t in range(1, int(n_steps) + 1):
        x = sysm.step(system, x)
        out[t] = x
    return out


# --------------------------------------------------------------------------- #
# tower paths
# --------------------------------------------------------------------------- #

@dataclass
class TowerPath:
    """A tower orbit of ``length`` usable times.

    ``x`` and ``branch`` (induced only) extend past ``length`` far enough to
    close the excursions that the ``lookahead`` used at construction needs.
    """

    cell: np.ndarray
    level: np.ndarray
    length: int
    x: Optional[np.ndarray] = None
    branch: Optional[np.ndarray] = None
    lookahead: int = 0
    offset: int = 0

    @property
    def base(self) -> Optional[np.ndarray]:
        """Projected orbit at the usable times (induced paths only)."""
        if self.x is None:
            return None
        return self.x[self.offset: self.offset + self.length]


def synthetic_path(tower: TowerModel, rng, length: int) -> TowerPath:
    """Stationary orbit of a synthetic tower.

    The initial state follows the invariant tower measure: a cell chosen with
    probability proportional to ``R_i m(Lam_i)`` and a uniform level below
    ``R_i``; later cells are i.i.d. from the base measure.
    """
    length = int(length)
    size_biased = tower.R * tower.weights
    cdf = np.cumsum(size_biased)
    c0 = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), tower.n_cells - 1))
    l0 = int(rng.integers(0, tower.R[c0]))
    first = int(tower.R[c0]) - l0
    cells = [np.array([c0])]
    covered = first
    mean_R = float(tower.kac_mass)
    while covered < length:
        need = length - covered
        batch = draw_cells(tower, rng, int(need / mean_R * 1.1) + 16)
        cs = np.cumsum(tower.R[batch])
        stop = np.searchsorted(cs, need, side="left") + 1
        batch = batch[:stop]
        cells.append(batch)
        covered += int(tower.R[batch].sum())
    cells = np.concatenate(cells)
    Rs = tower.R[cells].copy()
    Rs[0] = first
    starts = np.concatenate([[0], np.cumsum(Rs)[:-1]])
    cell_t = np.repeat(cells, Rs)[:length]
    level_t = (np.arange(int(Rs.sum())) - np.repeat(starts, Rs))[:length]
    level_t[: first] += l0
    return TowerPath(cell=cell_t, level=level_t, length=length)


def induced_path(tower: TowerModel, rng, length: int, burn_in: int = 1000,
                 lookahead: int = 0, max_extension: int = 10_000_000) -> TowerPath:
    """Single-chain form of :func:`induced_paths`."""
    return induced_paths(tower, rng, 1, length, burn_in, lookahead, max_extension)[0]


def induced_paths(tower: TowerModel, rng, n_chains: int, length: int, burn_in: int = 1000,
                  lookahead: int = 0, max_extension: int = 10_000_000):
    """Independent orbits of an induced tower, read off base orbits of the circle map.

    Each base orbit starts uniformly in ``Lam`` (a level-0 state) and is
    recorded from time ``burn_in`` on, by which point its tower state is close
    to the invariant tower law. It is extended until a visit to ``Lam`` occurs
    after ``burn_in + length + lookahead - 1``, so that every usable time has
    its excursions closed.
    """
    if tower.kind != "induced":
        raise UsageError("induced paths need an induced tower")
    system = tower.system
    lam_lo, _ = tower.structure.lam
    burn_in = int(burn_in)
    x0 = lam_lo + rng.random(int(n_chains)) / tower.structure.d
    xs = base_orbit(system, x0, burn_in + int(length) + int(lookahead))
    stop = slice(burn_in, burn_in + int(length))
    paths = []
    for c in range(int(n_chains)):
        col = xs[:, c]
        extra = []
        last = float(col[-1])
        steps = 0
        while last < lam_lo:
            last = float(sysm.step(system, last))
            extra.append(last)
            steps += 1
            if steps > max_extension:
                raise ConstructionError("orbit did not return to the base within the extension budget")
        x_full = np.concatenate([col, np.array(extra)]) if extra else col.copy()
        branch = sysm.branch_index(system, x_full).astype(np.int8)
        cell_t, level_t = _cells_and_levels(tower, x_full, branch)
        paths.append(TowerPath(cell=cell_t[stop], level=level_t[stop], length=int(length),
                               x=x_full, branch=branch, lookahead=int(lookahead), offset=burn_in))
    return paths


def _cells_and_levels(tower, x, branch):
    d = tower.structure.d
    vis = branch == d - 1
    idx = np.arange(len(x))
    last_visit = np.maximum.accumulate(np.where(vis, idx, -1))
    level = idx - last_visit
    cell_at_visit = np.full(len(x), -1, dtype=np.int64)
    cell_at_visit[vis] = tower.locate(x[vis])
    cell = np.where(last_visit >= 0, cell_at_visit[np.maximum(last_visit, 0)], -1)
    level = np.where(last_visit >= 0, level, -1)
    return cell, level


def stationary_synthetic_start(tower: TowerModel, rng, n: int):
    """``n`` states from the invariant tower measure: returns ``(cells, levels)``."""
    w = invariant_levels(tower)
    levels = np.searchsorted(np.cumsum(w), rng.random(n) * w.sum(), side="right")
    # given level l, the cell is drawn among cells with R > l proportionally to weight
    cells = np.empty(n, dtype=np.int64)
    order = np.argsort(tower.R)
    R_sorted = tower.R[order]
    wts = tower.weights[order]
    suffix = np.cumsum(wts[::-1])[::-1]
    for i, lv in enumerate(levels):
        j0 = np.searchsorted(R_sorted, lv, side="right")
        u = rng.random() * suffix[j0]
        cum = np.cumsum(wts[j0:])
        cells[i] = order[j0 + min(np.searchsorted(cum, u, side="right"), len(cum) - 1)]
    return cells, levels.astype(np.int64)


# --------------------------------------------------------------------------- #
# image intervals along an orbit
# --------------------------------------------------------------------------- #

def run_interval(tower: TowerModel, L):
    """Pullback of ``Lam`` through ``L`` neutral-branch inverses (precomputed chain)."""
    st = tower.structure
    L = np.asarray(L, dtype=np.int64)
    if np.any(L >= len(st.run_lo)):
        raise UsageError("run length beyond the precomputed chain")
    return st.run_lo[L], st.run_width[L]


def orbit_image_intervals(tower: TowerModel, x, branch, k: int, times):
    """Intervals ``pi(F^k(P))`` for the ``P_{2k}`` elements of states along a base orbit.

    For the state at orbit time ``t`` (a point ``s = t - V_0`` steps after its
    last visit ``V_0`` to ``Lam``), ``P`` reveals every cell entered up to time
    ``t + 2k - 1``. With ``V`` the last such visit and ``E`` the next one, the
    image is the set of points following the orbit's branches from ``t + k``
    to ``E - 1`` and then landing in ``Lam``.

    Returns ``(lo, width)``; entries are NaN where the orbit does not close the
    needed excursion or where ``t`` precedes the first visit.
    """
    d = tower.structure.d
    times = np.asarray(times, dtype=np.int64)
    k = int(k)
    n = len(x)
    vis = branch == d - 1
    idx = np.arange(n)
    last_visit = np.maximum.accumulate(np.where(vis, idx, -1))
    nxt = np.where(vis, idx, n)
    next_visit = np.minimum.accumulate(nxt[::-1])[::-1]  # first visit >= u
    next_after = np.append(next_visit[1:], n)  # first visit > u
    # length of the neutral-branch run ending at u
    zero = (branch == 0).astype(np.int64)
    run = np.zeros(n, dtype=np.int64)
    if n:
        csum = np.cumsum(zero)
        reset = np.maximum.accumulate(np.where(zero == 0, csum, 0))
        run = csum - reset
    horizon = np.minimum(times + max(2 * k - 1, 0), n - 1)
    V = last_visit[horizon]
    ok = (last_visit[np.minimum(times, n - 1)] >= 0) & (times < n) & (V >= 0)
    E = np.where(ok, next_after[np.maximum(V, 0)], n)
    ok &= E < n
    lo = np.full(times.shape, np.nan)
    w = np.full(times.shape, np.nan)
    if not ok.any():
        return lo, w
    t = times[ok]
    Eo = E[ok]
    L = run[Eo - 1]
    L = np.minimum(L, len(tower.structure.run_lo) - 1)
    start = t + k
    inside_run = Eo - L <= start
    L_eff = np.where(inside_run, Eo - start, L)
    r_lo, r_w = run_interval(tower, L_eff)
    lengths = np.where(inside_run, 0, Eo - L - start)
    out_lo, out_w = pull_ragged(tower.system, branch, start, lengths, r_lo, r_w)
    lo[ok] = out_lo
    w[ok] = out_w
    return lo, w


def path_image_intervals(tower: TowerModel, path: TowerPath, k: int):
    """Intervals ``pi(F^k(P))`` for every usable time of an induced path."""
    if path.x is None:
        raise UsageError("image intervals need an induced path")
    if path.lookahead < 2 * k:
        raise UsageError(f"path lookahead {path.lookahead} is shorter than 2k = {2 * k}")
    times = np.arange(path.offset, path.offset + path.length)
    return orbit_image_intervals(tower, path.x, path.branch, k, times)
