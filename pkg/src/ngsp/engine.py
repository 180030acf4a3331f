"""Label-setting machinery shared by the OUM and NGSP solvers.

Node labels, the Considered heap, accepted-front bookkeeping and the
semi-Lagrangian updates from a front segment or a single accepted node.
Internally nodes are row-major linear indices ``k = j * n_x + i``; the public
helpers accept and return :class:`~ngsp.grid.NodeIndex`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import KING_OFFSETS, Grid, NodeIndex, Point, node_position
from .speed import SpeedField

FAR, CONS, ACC = 0, 1, 2
LABEL_NAMES = {FAR: "Far", CONS: "Cons", ACC: "Acc"}

INF = math.inf
BLOCK = 8  # side of the buckets indexing accepted-front nodes

SEG_SCAN = 17
SEG_TOL = 1e-9
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FrontSegment:
    a: NodeIndex
    b: NodeIndex


class SolverState:
    """Mutable per-solve state. Exclusively owned by one solve."""

    def __init__(self, grid: Grid):
        self.grid = grid
        m = grid.size
        nx, ny = grid.n_x, grid.n_y
        self.labels = bytearray(m)
        self.u = [INF] * m
        self.v = [INF] * m
        self.gx = [0.0] * m
        self.gy = [0.0] * m
        self.heap: list = []
        self.accept_count = 0
        self.order: list[int] = []
        self.nd = _king_lists(grid)
        # count of non-accepted ND neighbours, for accepted-front membership
        self.nonacc = [len(n) for n in self.nd]
        self.nbx = (nx + BLOCK - 1) // BLOCK
        self.nby = (ny + BLOCK - 1) // BLOCK
        self.blocks = [set() for _ in range(self.nbx * self.nby)]
        self.stats = {
            "update_calls": 0,
            "oum_updates": 0,
            "ngsp_updates": 0,
            "segment_evals": 0,
            "point_evals": 0,
            "ray_steps": 0,
        }

    # public array views
    @property
    def values(self) -> np.ndarray:
        return np.array(self.u).reshape(self.grid.shape)

    @property
    def grad(self) -> np.ndarray:
        return np.stack([self.gx, self.gy], axis=1)

    def label(self, idx: NodeIndex) -> int:
        return self.labels[self.grid.linear(idx)]

    def is_aff(self, k: int) -> bool:
        return self.labels[k] == ACC and self.nonacc[k] > 0

    def block_of(self, k: int) -> int:
        nx = self.grid.n_x
        return (k // nx // BLOCK) * self.nbx + (k % nx) // BLOCK


def _king_lists(grid: Grid) -> list[list[int]]:
    nx, ny = grid.n_x, grid.n_y
    out = []
    for j in range(ny):
        for i in range(nx):
            out.append([
                (j + dj) * nx + i + di
                for di, dj in KING_OFFSETS
                if 0 <= i + di < nx and 0 <= j + dj < ny
            ])
    return out


def accept(state: SolverState, k: int, value: float) -> None:
    """Move node ``k`` to Acc with U = ``value`` and refresh the front index."""
    if state.labels[k] == ACC:
        raise RuntimeError(f"node {k} accepted twice")
    state.labels[k] = ACC
    state.u[k] = value
    state.accept_count += 1
    state.order.append(k)
    nonacc = state.nonacc
    labels = state.labels
    for n in state.nd[k]:
        nonacc[n] -= 1
        if labels[n] == ACC and nonacc[n] == 0:
            state.blocks[state.block_of(n)].discard(n)
    if nonacc[k] > 0:
        state.blocks[state.block_of(k)].add(k)


def initialize(grid: Grid, targets) -> SolverState:
    if not targets:
        raise ValueError("at least one target node is required")
    state = SolverState(grid)
    seen = set()
    for t in targets:
        k = t if isinstance(t, int) else grid.linear(t)
        if k in seen:
            continue
        seen.add(k)
        state.v[k] = 0.0
        accept(state, k, 0.0)
    return state


def push(state: SolverState, k: int, value: float) -> None:
    """Lower V at ``k`` to ``value`` (if smaller) and mark it Considered."""
    if value < state.v[k]:
        state.v[k] = value
        state.labels[k] = CONS
        heapq.heappush(state.heap, (value, k))


def pop_min_considered(state: SolverState) -> Optional[int]:
    """Pop the Considered node with least V, ties to the lower index."""
    heap = state.heap
    labels, v = state.labels, state.v
    while heap:
        val, k = heapq.heappop(heap)
        if labels[k] == CONS and val == v[k]:
            return k
    return None


# --- accepted front ---------------------------------------------------------


def accepted_front_nodes(state: SolverState) -> list[NodeIndex]:
    """Accepted nodes with at least one non-accepted ND neighbour."""
    g = state.grid
    return [g.unravel(k) for k in range(g.size) if state.is_aff(k)]


def _segments_owned(state: SolverState, n: int):
    """Front segments whose left/lower endpoint is ``n`` (an AFF node)."""
    nx = state.grid.n_x
    i, j = n % nx, n // nx
    if i + 1 < nx and state.is_aff(n + 1):
        yield n + 1
    if j + 1 < state.grid.n_y and state.is_aff(n + nx):
        yield n + nx


def front_segments(state: SolverState) -> list[FrontSegment]:
    g = state.grid
    out = []
    for k in range(g.size):
        if state.is_aff(k):
            for m in _segments_owned(state, k):
                out.append(FrontSegment(g.unravel(k), g.unravel(m)))
    return out


def _segment_distance_cells(i: int, j: int, ni: int, nj: int, horizontal: bool) -> float:
    """Distance (in cells) from node (i, j) to a unit segment starting at (ni, nj)."""
    if horizontal:
        ox = max(0, ni - i, i - ni - 1)
        oy = nj - j
    else:
        ox = ni - i
        oy = max(0, nj - j, j - nj - 1)
    return math.sqrt(ox * ox + oy * oy)


def near_segments(state: SolverState, k: int, radius: float) -> list[tuple[int, int]]:
    """Front segments (a, b) within Euclidean distance < ``radius`` of node k."""
    g = state.grid
    nx, ny, dx = g.n_x, g.n_y, g.dx
    i, j = k % nx, k // nx
    r = int(radius / dx) + 1
    i0, i1 = max(i - r, 0), min(i + r, nx - 1)
    j0, j1 = max(j - r, 0), min(j + r, ny - 1)
    out = []
    blocks = state.blocks
    for bj in range(j0 // BLOCK, j1 // BLOCK + 1):
        row = bj * state.nbx
        for bi in range(i0 // BLOCK, i1 // BLOCK + 1):
            for n in blocks[row + bi]:
                ni, nj = n % nx, n // nx
                if ni < i0 or ni > i1 or nj < j0 or nj > j1:
                    continue
                for m in _segments_owned(state, n):
                    horizontal = m == n + 1
                    if _segment_distance_cells(i, j, ni, nj, horizontal) * dx < radius:
                        out.append((n, m))
    return out


def near_front(state: SolverState, x: NodeIndex, radius: float) -> list[FrontSegment]:
    g = state.grid
    segs = near_segments(state, g.linear(x), radius)
    segs.sort()
    return [FrontSegment(g.unravel(a), g.unravel(b)) for a, b in segs]


# --- semi-Lagrangian updates -----------------------------------------------


def elliptic_travel(dx_: float, dy_: float, s: float, w1: float, w2: float) -> float:
    """Travel time along the vector (dx_, dy_) at speed S / sqrt(1 + (w.a)^2)."""
    t = w1 * dx_ + w2 * dy_
    return math.sqrt(dx_ * dx_ + dy_ * dy_ + t * t) / s


def segment_min_elliptic(d0x, d0y, ex, ey, ua, ub, s, w1, w2):
    """Exact minimiser over lam in [0, 1] of

        travel(d0 + lam e) + lam ua + (1 - lam) ub

    for an elliptic speed. The travel term is a norm of an affine function of
    lam, so the objective is convex; its stationary point solves a quadratic.
    Returns (value, lam).
    """
    we = w1 * ex + w2 * ey
    wd = w1 * d0x + w2 * d0y
    alpha = ex * ex + ey * ey + we * we
    beta = ex * d0x + ey * d0y + we * wd
    gamma = d0x * d0x + d0y * d0y + wd * wd
    delta = ua - ub

    best = math.sqrt(gamma) / s + ub  # lam = 0
    lam_best = 0.0
    v1 = math.sqrt(alpha + 2.0 * beta + gamma) / s + ua  # lam = 1
    if v1 < best:
        best, lam_best = v1, 1.0
    disc = alpha * gamma - beta * beta
    k = -delta * s / math.sqrt(alpha)
    if disc > 0.0 and -1.0 < k < 1.0:
        t = k * math.sqrt(disc / (1.0 - k * k))
        lam = (t - beta) / alpha
        if 0.0 < lam < 1.0:
            q = (alpha * lam + 2.0 * beta) * lam + gamma
            if q > 0.0:
                val = math.sqrt(q) / s + ub + lam * delta
                if val < best:
                    best, lam_best = val, lam
    return best, lam_best


def _golden(phi, lo, hi, tol):
    """Golden-section search for a minimum of ``phi`` on [lo, hi]."""
    c = hi - _GOLD * (hi - lo)
    d = lo + _GOLD * (hi - lo)
    fc, fd = phi(c), phi(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLD * (hi - lo)
            fc = phi(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLD * (hi - lo)
            fd = phi(d)
    return (c, fc) if fc <= fd else (d, fd)


def segment_min_generic(px, py, d0x, d0y, ex, ey, ua, ub, func):
    """Same objective as :func:`segment_min_elliptic` for an arbitrary speed.

    Coarse scan on SEG_SCAN points, then golden-section refinement of the
    best bracket down to width SEG_TOL.
    """
    delta = ua - ub

    def phi(lam):
        ddx = d0x + lam * ex
        ddy = d0y + lam * ey
        r = math.sqrt(ddx * ddx + ddy * ddy)
        if r == 0.0:
            return ub + lam * delta
        return r / func(px, py, ddx / r, ddy / r) + ub + lam * delta

    lams = [i / (SEG_SCAN - 1) for i in range(SEG_SCAN)]
    vals = [phi(t) for t in lams]
    ib = min(range(SEG_SCAN), key=vals.__getitem__)
    best, lam_best = vals[ib], lams[ib]
    lo = lams[max(ib - 1, 0)]
    hi = lams[min(ib + 1, SEG_SCAN - 1)]
    lam, val = _golden(phi, lo, hi, SEG_TOL)
    if val < best:
        best, lam_best = val, lam
    return best, lam_best


def segment_update(x: Point, seg_a: Point, u_a: float, seg_b: Point, u_b: float,
                   field: SpeedField) -> tuple[float, float]:
    """min over lam of travel(x -> lam a + (1-lam) b) + lam u_a + (1-lam) u_b."""
    if not (math.isfinite(u_a) and math.isfinite(u_b)):
        raise ValueError("segment endpoint values must be finite")
    d0x, d0y = seg_b[0] - x[0], seg_b[1] - x[1]
    ex, ey = seg_a[0] - seg_b[0], seg_a[1] - seg_b[1]
    # x on the segment means zero travel for some lam
    cross = d0x * ey - d0y * ex
    ee = ex * ex + ey * ey
    t = -(d0x * ex + d0y * ey) / ee
    if abs(cross) < 1e-15 and -1e-12 <= t <= 1.0 + 1e-12:
        raise ValueError("x lies on the segment")
    if field.metric is not None:
        s, w1, w2 = field.metric(x[0], x[1])
        return segment_min_elliptic(d0x, d0y, ex, ey, u_a, u_b, s, w1, w2)
    return segment_min_generic(x[0], x[1], d0x, d0y, ex, ey, u_a, u_b, field.func)


def direct_neighbor_update(x: Point, xp: Point, u_xp: float, field: SpeedField) -> float:
    """U(x') + |x' - x| / f(x, (x' - x)/|x' - x|)."""
    ddx, ddy = xp[0] - x[0], xp[1] - x[1]
    r = math.hypot(ddx, ddy)
    if r == 0.0:
        raise ValueError("coincident points")
    if field.metric is not None:
        s, w1, w2 = field.metric(x[0], x[1])
        return elliptic_travel(ddx, ddy, s, w1, w2) + u_xp
    return r / field.func(x[0], x[1], ddx / r, ddy / r) + u_xp


class LocalSpeed:
    """Speed queries at a fixed node, as used inside one update."""

    __slots__ = ("px", "py", "coeffs", "func")

    def __init__(self, field: SpeedField, px: float, py: float):
        self.px, self.py = px, py
        self.coeffs = field.metric(px, py) if field.metric is not None else None
        self.func = field.func

    def travel(self, ddx: float, ddy: float) -> float:
        if self.coeffs is not None:
            s, w1, w2 = self.coeffs
            return elliptic_travel(ddx, ddy, s, w1, w2)
        r = math.sqrt(ddx * ddx + ddy * ddy)
        return r / self.func(self.px, self.py, ddx / r, ddy / r)

    def segment(self, d0x, d0y, ex, ey, ua, ub):
        if self.coeffs is not None:
            s, w1, w2 = self.coeffs
            return segment_min_elliptic(d0x, d0y, ex, ey, ua, ub, s, w1, w2)
        return segment_min_generic(self.px, self.py, d0x, d0y, ex, ey, ua, ub, self.func)


def position(grid: Grid, k: int) -> tuple[float, float]:
    nx = grid.n_x
    return (grid.x_min + (k % nx) * grid.dx, grid.y_min + (k // nx) * grid.dx)


__all__ = [
    "FAR", "CONS", "ACC", "FrontSegment", "SolverState", "initialize", "accept", "push",
    "pop_min_considered", "accepted_front_nodes", "front_segments", "near_front",
    "near_segments", "segment_update", "direct_neighbor_update", "node_position",
]
