"""Uniform square-cell grids and the two neighbourhood systems N(x), ND(x)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

# (di, dj) offsets. Axis neighbours first (left, right, down, up), then diagonals.
AXIS_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))
DIAG_OFFSETS = ((-1, -1), (-1, 1), (1, -1), (1, 1))
KING_OFFSETS = AXIS_OFFSETS + DIAG_OFFSETS


class Point(NamedTuple):
    x: float
    y: float


class NodeIndex(NamedTuple):
    i: int  # column
    j: int  # row


@dataclass(frozen=True)
class Grid:
    """Regular lattice with equal spacing on both axes.

    ``n_y`` defaults to ``n_x``; the y extent must produce the same spacing
    as the x extent.
    """

    n_x: int
    n_y: int = 0
    x_min: float = -0.5
    x_max: float = 0.5
    y_min: float = -0.5
    y_max: float = 0.5

    def __post_init__(self):
        if self.n_y == 0:
            object.__setattr__(self, "n_y", self.n_x)
        if self.n_x < 3 or self.n_y < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.n_x}x{self.n_y}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty domain")
        dy = (self.y_max - self.y_min) / (self.n_y - 1)
        if not math.isclose(dy, self.dx, rel_tol=1e-9):
            raise ValueError(f"anisotropic spacing: dx={self.dx}, dy={dy}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def h(self) -> float:
        """Grid diameter sqrt(2) * dx."""
        return math.sqrt(2.0) * self.dx

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (rows, columns) of a row-major field."""
        return (self.n_y, self.n_x)

    def contains(self, idx: NodeIndex) -> bool:
        return 0 <= idx[0] < self.n_x and 0 <= idx[1] < self.n_y

    def _check(self, idx):
        if not self.contains(idx):
            raise IndexError(f"node {tuple(idx)} outside {self.n_x}x{self.n_y} grid")

    def linear(self, idx: NodeIndex) -> int:
        self._check(idx)
        return idx[1] * self.n_x + idx[0]

    def unravel(self, k: int) -> NodeIndex:
        if not 0 <= k < self.size:
            raise IndexError(k)
        return NodeIndex(k % self.n_x, k // self.n_x)


def node_position(grid: Grid, idx: NodeIndex) -> Point:
    grid._check(idx)
    return Point(grid.x_min + idx[0] * grid.dx, grid.y_min + idx[1] * grid.dx)


def _neighbors(grid, idx, offsets):
    grid._check(idx)
    i, j = idx
    return [
        NodeIndex(i + di, j + dj)
        for di, dj in offsets
        if 0 <= i + di < grid.n_x and 0 <= j + dj < grid.n_y
    ]


def neighbors_n(grid: Grid, idx: NodeIndex) -> list[NodeIndex]:
    """Axis neighbours inside the grid, ordered left, right, down, up."""
    return _neighbors(grid, idx, AXIS_OFFSETS)


def neighbors_nd(grid: Grid, idx: NodeIndex) -> list[NodeIndex]:
    """King-move neighbours inside the grid (axis ones first)."""
    return _neighbors(grid, idx, KING_OFFSETS)


def snap_to_grid(grid: Grid, p: Point) -> NodeIndex:
    """Nearest node to ``p``; ties go to the lower index.

    Points up to dx/2 outside the domain are clamped, anything further is an
    error.
    """
    x, y = p
    tol = 0.5 * grid.dx * (1 + 1e-12)
    if (
        x < grid.x_min - tol
        or x > grid.x_max + tol
        or y < grid.y_min - tol
        or y > grid.y_max + tol
    ):
        raise ValueError(f"point {tuple(p)} is outside the grid domain")

    def nearest(coord, lo, n):
        s = (coord - lo) / grid.dx
        k = math.floor(s)
        # exact half goes down
        if s - k > 0.5:
            k += 1
        return min(max(k, 0), n - 1)

    return NodeIndex(nearest(x, grid.x_min, grid.n_x), nearest(y, grid.y_min, grid.n_y))
