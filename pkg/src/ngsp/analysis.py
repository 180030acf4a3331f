"""Reference solutions, error norms, the HJB residual and convergence studies."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .grid import Grid, NodeIndex, Point
from .neighbor_gradient import minimizer_generic
from .solve import ValueField, solve
from .speed import ConfigurationError, ProblemSpec, SpeedField, make_problem

Reference = Union[Callable[[Point], float], np.ndarray]


def exact_hjb1(p: Point, lam: float = 5.0, mu: float = -10.0) -> float:
    """Closed-form HJB-1 value: the dual norm of the elliptic speed."""
    x, y = p
    q = (1.0 + lam * lam) * x * x + (1.0 + mu * mu) * y * y + 2.0 * lam * mu * x * y
    return math.sqrt(max(q, 0.0))


def exact_hjb1_grid(grid: Grid, lam: float = 5.0, mu: float = -10.0) -> np.ndarray:
    X, Y = grid_coordinates(grid)
    q = (1.0 + lam * lam) * X * X + (1.0 + mu * mu) * Y * Y + 2.0 * lam * mu * X * Y
    return np.sqrt(np.maximum(q, 0.0))


def grid_coordinates(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    xs = grid.x_min + grid.dx * np.arange(grid.n_x)
    ys = grid.y_min + grid.dx * np.arange(grid.n_y)
    return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class ErrorReport:
    n_x: int
    e_inf: float
    e_1: float
    e_2: float
    cpu_seconds: float

    def __post_init__(self):
        if min(self.e_inf, self.e_1, self.e_2, self.cpu_seconds) < 0:
            raise ValueError("error norms must be nonnegative")
        # discrete interpolation inequality, a cheap sanity check on every report
        if self.e_2 > math.sqrt(self.e_inf * self.e_1) * (1 + 1e-12) + 1e-300:
            raise ValueError("E2 exceeds sqrt(Einf * E1)")


def _reference_values(grid: Grid, reference: Reference) -> np.ndarray:
    if callable(reference):
        X, Y = grid_coordinates(grid)
        out = np.empty(grid.shape)
        for j in range(grid.n_y):
            for i in range(grid.n_x):
                out[j, i] = reference(Point(X[j, i], Y[j, i]))
    else:
        out = np.asarray(reference, float)
        if out.shape != grid.shape:
            raise ValueError(f"reference shape {out.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("reference is not finite at every node")
    return out


def error_norms(field: ValueField, reference: Reference) -> ErrorReport:
    ref = _reference_values(field.grid, reference)
    err = np.abs(field.values - ref)
    w = field.grid.dx ** 2
    # math.fsum keeps the sums independent of node ordering
    e1 = math.fsum(err.ravel()) * w
    e2 = math.sqrt(math.fsum((err * err).ravel()) * w)
    return ErrorReport(field.grid.n_x, float(err.max()), e1, e2, field.wall_seconds)


def hjb_residual(field: ValueField, speed: SpeedField, x: NodeIndex) -> float:
    """|min_a f(x,a) a.grad U + 1| with a central-difference gradient."""
    g = field.grid
    i, j = x
    if not (0 < i < g.n_x - 1 and 0 < j < g.n_y - 1):
        raise ValueError(f"{x} is a boundary node")
    U = field.values
    gx = (U[j, i + 1] - U[j, i - 1]) / (2.0 * g.dx)
    gy = (U[j + 1, i] - U[j - 1, i]) / (2.0 * g.dx)
    if gx == 0.0 and gy == 0.0:
        return 1.0
    px, py = g.x_min + i * g.dx, g.y_min + j * g.dx
    th = minimizer_generic(gx, gy, px, py, speed.func)
    a1, a2 = math.cos(th), math.sin(th)
    return abs(speed.func(px, py, a1, a2) * (a1 * gx + a2 * gy) + 1.0)


# -- convergence studies ----------------------------------------------------

@dataclass(frozen=True)
class ReferenceSpec:
    kind: str = "exact"  # "exact" (HJB-1 closed form) or "oum"
    size: int = 401

    def __post_init__(self):
        if self.kind not in ("exact", "oum"):
            raise ConfigurationError(f"unknown reference kind {self.kind!r}")


def check_nesting(sizes: Sequence[int], ref_size: int) -> None:
    for n in sizes:
        if (ref_size - 1) % (n - 1):
            raise ConfigurationError(f"grid {n} does not nest in reference grid {ref_size}")


def _grid_for(problem: ProblemSpec, n: int) -> Grid:
    x0, x1, y0, y1 = problem.domain
    return Grid(n, n, x0, x1, y0, y1)


def convergence_study(problem: ProblemSpec, sizes: Sequence[int], method: str = "ngsp",
                      reference: ReferenceSpec = ReferenceSpec(), threads: int = 1,
                      bootstrap_fraction: float = 0.05) -> list[ErrorReport]:
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ConfigurationError("sizes must be ascending")
    field = make_problem(problem)

    ref_grid = None
    if reference.kind == "exact":
        if problem.name not in ("hjb1", "isotropic"):
            raise ConfigurationError(f"no closed form for {problem.name}; use an OUM reference")
    else:
        check_nesting(sizes, reference.size)
        ref_grid = _grid_for(problem, reference.size)

    def exact(grid: Grid) -> np.ndarray:
        if problem.name == "isotropic":
            X, Y = grid_coordinates(grid)
            tx, ty = problem.target[0]
            return np.hypot(X - tx, Y - ty) / (problem.scale * field.params["speed"])
        p = field.params
        return exact_hjb1_grid(grid, p["lambda"], p["mu"]) / problem.scale

    def run(n: int) -> ValueField:
        return solve(_grid_for(problem, n), field, problem.target, method,
                     bootstrap_fraction=bootstrap_fraction)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(run, n) for n in sizes]
        if ref_grid is not None:
            ref_future = pool.submit(solve, ref_grid, field, problem.target, "oum")
        fields = [f.result() for f in futures]
        ref_values = ref_future.result().values if ref_grid is not None else None

    reports = []
    for n, vf in zip(sizes, fields):
        if ref_values is None:
            ref = exact(vf.grid)
        else:
            s = (reference.size - 1) // (n - 1)
            ref = ref_values[::s, ::s]
        reports.append(error_norms(vf, ref))
    return reports


# -- exponent oracle for HJB-1 ----------------------------------------------

ORACLE_SIZE = 201
ORACLE_POINTS = 100
ORACLE_SEED = 20240611
ORACLE_C = 1.0  # residual bound is ORACLE_C * h
ORACLE_GAP = 10.0


@dataclass(frozen=True)
class ExponentOracle:
    residuals: dict  # exponent -> mean residual
    bound: float
    shipped: float

    @property
    def passing(self) -> list[float]:
        return [e for e, r in self.residuals.items() if r <= self.bound]

    @property
    def ok(self) -> bool:
        if self.passing != [self.shipped]:
            return False
        other = [r for e, r in self.residuals.items() if e != self.shipped]
        return all(r >= ORACLE_GAP * self.residuals[self.shipped] for r in other)


def exponent_oracle(lam: float = 5.0, mu: float = -10.0, size: int = ORACLE_SIZE,
                    n_points: int = ORACLE_POINTS, seed: int = ORACLE_SEED) -> ExponentOracle:
    """Mean HJB residual of the closed-form field under each exponent sign."""
    grid = Grid(size)
    exact = ValueField(grid, exact_hjb1_grid(grid, lam, mu), "hjb1", "exact")
    rng = np.random.default_rng(seed)
    c = size // 2
    nodes = []
    while len(nodes) < n_points:
        i, j = (int(v) for v in rng.integers(1, size - 1, 2))
        if max(abs(i - c), abs(j - c)) > 2:  # the gradient is singular at the target
            nodes.append(NodeIndex(i, j))
    residuals = {}
    for e in (-0.5, 0.5):
        f = make_problem(ProblemSpec("hjb1", {"lambda": lam, "mu": mu, "exponent": e}))
        residuals[e] = float(np.mean([hjb_residual(exact, f, x) for x in nodes]))
    shipped = make_problem(ProblemSpec("hjb1")).params["exponent"]
    return ExponentOracle(residuals, ORACLE_C * grid.h, shipped)





def hjb1_sign_table(lam: float = 5.0, mu: float = -10.0, size: int = ORACLE_SIZE,
                    n_points: int = 40, seed: int = ORACLE_SEED) -> dict:
    """Mean residuals for every combination of closed-form cross-term sign and exponent.

    Keys are ``(cross_sign, exponent)``; ``cross_sign`` multiplies the ``2 lam mu x y`` term.
    """
    grid = Grid(size)
    X, Y = grid_coordinates(grid)
    rng = np.random.default_rng(seed)
    c = size // 2
    nodes = []
    while len(nodes) < n_points:
        i, j = (int(v) for v in rng.integers(1, size - 1, 2))
        if max(abs(i - c), abs(j - c)) > 2:
            nodes.append(NodeIndex(i, j))
    table = {}
    for cross in (1.0, -1.0):
        q = (1 + lam * lam) * X * X + (1 + mu * mu) * Y * Y + cross * 2 * lam * mu * X * Y
        vf = ValueField(grid, np.sqrt(np.maximum(q, 0.0)), "hjb1", "exact")
        for e in (-0.5, 0.5):
            f = make_problem(ProblemSpec("hjb1", {"lambda": lam, "mu": mu, "exponent": e}))
            table[(cross, e)] = float(np.mean([hjb_residual(vf, f, x) for x in nodes]))
    return table


__all__ = ["exact_hjb1", "exact_hjb1_grid", "error_norms", "hjb_residual", "ErrorReport",
           "ReferenceSpec", "convergence_study", "exponent_oracle", "ExponentOracle",
           "hjb1_sign_table"]
