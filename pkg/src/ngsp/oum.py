"""Ordered Upwind Method: label setting with a search along the accepted front."""

from __future__ import annotations

import time

from . import engine
from .engine import ACC, INF, LocalSpeed, SolverState
from .grid import Grid, NodeIndex
from .speed import SpeedField


def _front_radius(grid: Grid, field: SpeedField) -> float:
    return grid.h * field.anisotropy


def oum_update(state: SolverState, x, field: SpeedField, radius: float | None = None) -> float:
    """Best segment update over the near front NF(x).

    Falls back to the best single accepted ND neighbour when NF(x) is empty
    and returns +inf when there is none.
    """
    g = state.grid
    k = x if isinstance(x, int) else g.linear(x)
    if radius is None:
        radius = _front_radius(g, field)
    nx, dx = g.n_x, g.dx
    i, j = k % nx, k // nx
    local = LocalSpeed(field, g.x_min + i * dx, g.y_min + j * dx)
    stats = state.stats
    stats["update_calls"] += 1
    stats["oum_updates"] += 1
    u = state.u
    best = INF
    segs = engine.near_segments(state, k, radius)
    for a, b in segs:
        d0x = (b % nx - i) * dx
        d0y = (b // nx - j) * dx
        ex = (a % nx - b % nx) * dx
        ey = (a // nx - b // nx) * dx
        val, _ = local.segment(d0x, d0y, ex, ey, u[a], u[b])
        if val < best:
            best = val
    stats["segment_evals"] += len(segs)
    if segs:
        return best
    for n in state.nd[k]:
        if state.labels[n] == ACC:
            stats["point_evals"] += 1
            val = local.travel((n % nx - i) * dx, (n // nx - j) * dx) + u[n]
            if val < best:
                best = val
    return best


def relax_oum(state: SolverState, k: int, field: SpeedField, radius: float) -> None:
    """Recompute V at every non-accepted ND neighbour of a freshly accepted node."""
    labels = state.labels
    for n in state.nd[k]:
        if labels[n] != ACC:
            engine.push(state, n, oum_update(state, n, field, radius))


def run_oum_phase(state: SolverState, field: SpeedField, stop_at: int | None = None) -> None:
    """Accept nodes with the OUM update until Cons empties or ``stop_at`` accepts."""
    radius = _front_radius(state.grid, field)
    while stop_at is None or state.accept_count < stop_at:
        k = engine.pop_min_considered(state)
        if k is None:
            return
        engine.accept(state, k, state.v[k])
        relax_oum(state, k, field, radius)


def seed(state: SolverState, field: SpeedField) -> None:
    """Compute first tentative values around the (already accepted) targets."""
    radius = _front_radius(state.grid, field)
    for k in list(state.order):
        relax_oum(state, k, field, radius)


def solve_oum(grid: Grid, field: SpeedField, targets, backend: str = "auto"):
    """Solve on ``grid`` with the Ordered Upwind Method; returns a ValueField."""
    from .solve import solve

    return solve(grid, field, targets, method="oum", backend=backend)


def solve_oum_python(grid: Grid, field: SpeedField, targets: list[NodeIndex]):
    state = engine.initialize(grid, targets)
    t0 = time.perf_counter()
    seed(state, field)
    run_oum_phase(state, field)
    elapsed = time.perf_counter() - t0
    state.stats["phase_seconds"] = {"oum": elapsed, "ngsp": 0.0}
    if state.accept_count != grid.size:
        raise RuntimeError(f"OUM left {grid.size - state.accept_count} nodes unaccepted")
    return state, elapsed


__all__ = ["oum_update", "solve_oum", "relax_oum", "run_oum_phase"]
