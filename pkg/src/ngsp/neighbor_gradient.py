"""Neighbour-gradient single-pass updates.

A considered node takes the gradient stored at each accepted ND neighbour,
turns it into a characteristic direction with the Hamiltonian minimiser,
walks that ray to the first accepted lattice edge and evaluates the
semi-Lagrangian value at the crossing point. No search along the front.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

from . import engine
from .engine import ACC, INF, FrontSegment, LocalSpeed, SolverState, _golden
from .grid import Grid, NodeIndex, Point
from .speed import SpeedField, UnitDirection

ANGLE_SCAN = 720
ANGLE_TOL = 1e-6
LAMBDA_EPS = 1e-12
AXIS_EPS = 1e-12

BOOTSTRAP_DEFAULT = 0.05
BOOTSTRAP_MAX = 0.5


@dataclass(frozen=True)
class GradientSample:
    dx_component: float
    dy_component: float
    owner: NodeIndex


@dataclass(frozen=True)
class RayHit:
    segment: FrontSegment
    point: Point
    lam: float
    steps: int
    distance: float


# --- gradients ----------------------------------------------------------------


def _gradient(state: SolverState, k: int) -> tuple[float, float]:
    g = state.grid
    nx, ny, dx = g.n_x, g.n_y, g.dx
    i, j = k % nx, k // nx
    lab, u = state.labels, state.u
    left = i > 0 and lab[k - 1] == ACC
    right = i < nx - 1 and lab[k + 1] == ACC
    down = j > 0 and lab[k - nx] == ACC
    up = j < ny - 1 and lab[k + nx] == ACC
    if left and right:
        ddx = (u[k + 1] - u[k - 1]) / (2.0 * dx)
    elif left:
        ddx = (u[k] - u[k - 1]) / dx
    elif right:
        ddx = (u[k + 1] - u[k]) / dx
    else:
        ddx = 0.0
    if down and up:
        ddy = (u[k + nx] - u[k - nx]) / (2.0 * dx)
    elif down:
        ddy = (u[k] - u[k - nx]) / dx
    elif up:
        ddy = (u[k + nx] - u[k]) / dx
    else:
        ddy = 0.0
    return ddx, ddy


def refresh_gradient(state: SolverState, k: int) -> None:
    state.gx[k], state.gy[k] = _gradient(state, k)


def update_gradient(state: SolverState, x_hat) -> GradientSample:
    """Recompute and store the stencil gradient at an accepted node."""
    g = state.grid
    k = x_hat if isinstance(x_hat, int) else g.linear(x_hat)
    if state.labels[k] != ACC:
        raise ValueError(f"gradient requested at non-accepted node {g.unravel(k)}")
    refresh_gradient(state, k)
    return GradientSample(state.gx[k], state.gy[k], g.unravel(k))


# --- characteristic direction -------------------------------------------------


def minimizer_elliptic(gx: float, gy: float, s: float, w1: float, w2: float) -> tuple[float, float]:
    """argmin_a (g.a) f(a) for f = S / sqrt(1 + (w.a)^2).

    The speed profile is the ellipse v^T (I + w w^T) v = S^2, whose support
    point against -g lies along -(I + w w^T)^{-1} g.
    """
    if gx == 0.0 and gy == 0.0:
        return -1.0, 0.0
    c = (w1 * gx + w2 * gy) / (1.0 + w1 * w1 + w2 * w2)
    px = gx - c * w1
    py = gy - c * w2
    r = math.sqrt(px * px + py * py)
    return -px / r, -py / r


def minimizer_generic(gx: float, gy: float, px: float, py: float, func) -> float:
    """Angle of argmin_a (g.a) f(x, a): coarse scan, then golden section."""
    if gx == 0.0 and gy == 0.0:
        return math.pi

    def phi(th):
        a1, a2 = math.cos(th), math.sin(th)
        return (gx * a1 + gy * a2) * func(px, py, a1, a2)

    step = 2.0 * math.pi / ANGLE_SCAN
    best_k, best = 0, INF
    for k in range(ANGLE_SCAN):
        val = phi(k * step)
        if val < best:
            best_k, best = k, val
    th, val = _golden(phi, (best_k - 1) * step, (best_k + 1) * step, ANGLE_TOL)
    if best <= val:
        th = best_k * step
    return th % (2.0 * math.pi)


def hamiltonian_minimizer(g, x: Point, field: SpeedField) -> UnitDirection:
    gx, gy = float(g[0]), float(g[1])
    if field.metric is not None:
        if gx == 0.0 and gy == 0.0:
            return UnitDirection(math.pi)
        s, w1, w2 = field.metric(x[0], x[1])
        return UnitDirection.from_vector(*minimizer_elliptic(gx, gy, s, w1, w2))
    return UnitDirection(minimizer_generic(gx, gy, x[0], x[1], field.func))


def _direction(local: LocalSpeed, gx: float, gy: float) -> tuple[float, float]:
    if local.coeffs is not None:
        return minimizer_elliptic(gx, gy, *local.coeffs)
    th = minimizer_generic(gx, gy, local.px, local.py, local.func)
    if th == math.pi:
        return -1.0, 0.0
    return math.cos(th), math.sin(th)


# --- ray walk ------------------------------------------------------------------


def _walk_family(state, i, j, along, across, horizontal_lines, nsteps):
    """Step across successive lattice lines of one family.

    ``along`` is the direction component normal to the lines, ``across`` the
    other one. Returns (n, a, b, lam) for the first crossing bracketed by
    accepted nodes, or None.
    """
    g = state.grid
    nx, ny = g.n_x, g.n_y
    lab = state.labels
    sgn = 1 if along > 0 else -1
    inv = 1.0 / abs(along)
    lim = (nx if horizontal_lines else ny) - 1  # range of the crossing coordinate
    base = i if horizontal_lines else j
    fixed0 = j if horizontal_lines else i
    for n in range(1, nsteps + 1):
        line = fixed0 + sgn * n
        if line < 0 or line > ((ny if horizontal_lines else nx) - 1):
            return None
        state.stats["ray_steps"] += 1
        c = base + across * n * inv
        if c < -LAMBDA_EPS or c > lim + LAMBDA_EPS:
            return None
        cf = math.floor(c)
        fr = c - cf
        # node at crossing coordinate q on this line: line * nx + q or q * nx + line
        if horizontal_lines:
            a = line * nx + cf
            step = 1
        else:
            a = cf * nx + line
            step = nx
        if fr < LAMBDA_EPS:
            if lab[a] == ACC:
                return n, a, a, 1.0
        elif fr > 1.0 - LAMBDA_EPS:
            if lab[a + step] == ACC:
                return n, a + step, a + step, 1.0
        elif lab[a] == ACC and lab[a + step] == ACC:
            return n, a, a + step, 1.0 - fr
    return None


def _ray_hit(state: SolverState, k: int, a1: float, a2: float, nsteps: int, radius: float):
    """Nearest accepted crossing along the ray from node k; (t, a, b, lam, n) or None."""
    g = state.grid
    nx, dx = g.n_x, g.dx
    i, j = k % nx, k // nx
    best = None
    if abs(a1) >= AXIS_EPS:
        hit = _walk_family(state, i, j, a1, a2, False, nsteps)
        if hit is not None:
            n, a, b, lam = hit
            best = (n * dx / abs(a1), a, b, lam, n)
    if abs(a2) >= AXIS_EPS:
        hit = _walk_family(state, i, j, a2, a1, True, nsteps)
        if hit is not None:
            n, a, b, lam = hit
            t = n * dx / abs(a2)
            if best is None or t < best[0]:
                best = (t, a, b, lam, n)
    if best is None or not best[0] < radius:
        return None
    return best


def _walk_params(grid: Grid, field: SpeedField) -> tuple[int, float]:
    ups = field.anisotropy
    return max(1, math.ceil(ups - 1e-9)), grid.h * ups


def ray_front_intersection(state: SolverState, x, a, field: SpeedField) -> Optional[RayHit]:
    g = state.grid
    k = x if isinstance(x, int) else g.linear(x)
    a1, a2 = a.a if isinstance(a, UnitDirection) else a
    nsteps, radius = _walk_params(g, field)
    hit = _ray_hit(state, k, a1, a2, nsteps, radius)
    if hit is None:
        return None
    t, na, nb, lam, n = hit
    px, py = engine.position(g, k)
    return RayHit(FrontSegment(g.unravel(na), g.unravel(nb)),
                  Point(px + t * a1, py + t * a2), lam, n, t)


# --- update -----------------------------------------------------------------------


def ngsp_update(state: SolverState, x, field: SpeedField, walk=None) -> float:
    """Min over direct-neighbour values and neighbour-gradient ray values."""
    g = state.grid
    k = x if isinstance(x, int) else g.linear(x)
    nsteps, radius = walk if walk is not None else _walk_params(g, field)
    nx, dx = g.n_x, g.dx
    i, j = k % nx, k // nx
    local = LocalSpeed(field, g.x_min + i * dx, g.y_min + j * dx)
    stats = state.stats
    stats["update_calls"] += 1
    stats["ngsp_updates"] += 1
    lab, u, gxs, gys = state.labels, state.u, state.gx, state.gy
    best = INF
    seen = []
    for n in state.nd[k]:
        if lab[n] != ACC:
            continue
        stats["point_evals"] += 1
        val = local.travel((n % nx - i) * dx, (n // nx - j) * dx) + u[n]
        if val < best:
            best = val
        grad = (gxs[n], gys[n])
        if grad in seen:
            continue
        seen.append(grad)
        a1, a2 = _direction(local, grad[0], grad[1])
        hit = _ray_hit(state, k, a1, a2, nsteps, radius)
        if hit is None:
            continue
        t, na, nb, lam, _ = hit
        stats["point_evals"] += 1
        if lam == 1.0:
            interp = u[na]
        else:
            interp = lam * u[na] + (1.0 - lam) * u[nb]
        val = local.travel(t * a1, t * a2) + interp
        if val < best:
            best = val
    return best


def accept_and_relax(state: SolverState, x_min, field: SpeedField, walk=None) -> None:
    """Accept a popped node, refresh nearby gradients, re-evaluate its neighbours."""
    g = state.grid
    k = x_min if isinstance(x_min, int) else g.linear(x_min)
    if walk is None:
        walk = _walk_params(g, field)
    engine.accept(state, k, state.v[k])
    refresh_gradient(state, k)
    lab = state.labels
    nd = state.nd[k]
    for n in nd:
        if lab[n] == ACC:
            refresh_gradient(state, n)
    for n in nd:
        if lab[n] != ACC:
            engine.push(state, n, ngsp_update(state, n, field, walk))


def bootstrap_threshold(grid: Grid, state: SolverState, fraction: float) -> int:
    ring = set()
    for k in state.order:
        ring.update(state.nd[k])
    ring.difference_update(state.order)
    return max(math.ceil(fraction * grid.size), state.accept_count + len(ring))


def clamp_fraction(fraction: float) -> float:
    if not math.isfinite(fraction):
        raise ValueError("bootstrap fraction must be finite")
    return min(max(fraction, 0.0), BOOTSTRAP_MAX)


def solve_ngsp(grid: Grid, field: SpeedField, targets, bootstrap_fraction: float = BOOTSTRAP_DEFAULT,
               backend: str = "auto"):
    """Solve with an OUM bootstrap followed by neighbour-gradient updates."""
    from .solve import solve

    return solve(grid, field, targets, method="ngsp", backend=backend,
                 bootstrap_fraction=bootstrap_fraction)


def solve_ngsp_python(grid: Grid, field: SpeedField, targets, bootstrap_fraction: float):
    from . import oum

    fraction = clamp_fraction(bootstrap_fraction)
    state = engine.initialize(grid, targets)
    t0 = time.perf_counter()
    oum.seed(state, field)
    oum.run_oum_phase(state, field, stop_at=bootstrap_threshold(grid, state, fraction))
    t1 = time.perf_counter()
    state.stats["bootstrap_accepted"] = state.accept_count
    for k in state.order:
        refresh_gradient(state, k)
    walk = _walk_params(grid, field)
    while True:
        k = engine.pop_min_considered(state)
        if k is None:
            break
        accept_and_relax(state, k, field, walk)
    t2 = time.perf_counter()
    state.stats["phase_seconds"] = {"oum": t1 - t0, "ngsp": t2 - t1}
    if state.accept_count != grid.size:
        raise RuntimeError(f"NGSP left {grid.size - state.accept_count} nodes unaccepted")
    return state, t2 - t0
