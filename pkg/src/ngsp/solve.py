"""Solver front door: backend selection and the ValueField result type.

The compiled core handles every built-in elliptic speed; anything else
(custom callables, the +1/2 exponent variant) runs on the pure-Python
implementation. Set ``NGSP_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Grid, NodeIndex, Point, snap_to_grid
from .speed import SpeedField

log = logging.getLogger(__name__)

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

if os.environ.get("NGSP_PURE_PYTHON"):
    _core = None

HAVE_CORE = _core is not None
METHODS = ("ngsp", "oum")


@dataclass
class ValueField:
    grid: Grid
    values: np.ndarray  # shape (n_y, n_x), row-major
    problem: str
    method: str
    wall_seconds: float = 0.0
    stats: dict = dc_field(default_factory=dict)
    order: np.ndarray | None = None  # linear indices in acceptance order

    def at(self, idx: NodeIndex) -> float:
        return float(self.values[idx[1], idx[0]])

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def acceptance_values(self) -> np.ndarray:
        return self.flat[self.order]


def target_indices(grid: Grid, targets) -> list[int]:
    """Linear indices for targets given as NodeIndex or Point; duplicates removed."""
    out = []
    for t in targets:
        if isinstance(t, NodeIndex):
            k = grid.linear(t)
        else:
            k = grid.linear(snap_to_grid(grid, Point(*t)))
        if k not in out:
            out.append(k)
    if not out:
        raise ValueError("at least one target is required")
    return out


def pick_backend(field: SpeedField, backend: str = "auto") -> str:
    if backend not in ("auto", "core", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    usable = HAVE_CORE and field.kernel is not None
    if backend == "core" and not usable:
        raise RuntimeError("compiled core unavailable for this speed field")
    if backend == "auto":
        return "core" if usable else "python"
    return backend


def solve(grid: Grid, field: SpeedField, targets, method: str = "ngsp",
          backend: str = "auto", bootstrap_fraction: float = 0.05) -> ValueField:
    from .neighbor_gradient import clamp_fraction, solve_ngsp_python
    from .oum import solve_oum_python

    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    frac = clamp_fraction(bootstrap_fraction)
    if frac != bootstrap_fraction:
        log.warning("bootstrap fraction %s clamped to %s", bootstrap_fraction, frac)
    tks = target_indices(grid, targets)
    which = pick_backend(field, backend)
    if which == "core":
        kind, params = field.kernel
        u, order, stats, elapsed = _core.solve(
            kind, np.asarray(params, float), grid.n_x, grid.n_y, grid.x_min, grid.y_min,
            grid.dx, np.asarray(tks, np.int64), method, frac, field.anisotropy)
        values = u.reshape(grid.shape)
        if stats["accept_count"] != grid.size:
            raise RuntimeError(f"{method} left {grid.size - stats['accept_count']} nodes unaccepted")
    else:
        if method == "oum":
            state, elapsed = solve_oum_python(grid, field, tks)
        else:
            state, elapsed = solve_ngsp_python(grid, field, tks, frac)
        values = state.values
        order = np.asarray(state.order, np.int64)
        stats = dict(state.stats)
        stats["accept_count"] = state.accept_count
    stats["backend"] = which
    return ValueField(grid, values, field.name, method, elapsed, stats, order)
