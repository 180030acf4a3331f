"""Direction-dependent speed functions f(x, a) and the benchmark problems.

Every built-in problem has the form

    f(x, a) = S(x) * (1 + (w(x) . a)^2) ** e,      e = -1/2 (default) or +1/2

For ``e = -1/2`` the curve {f(x, a) a : a in S1} is an ellipse, so 1/f is a
norm and both the Hamiltonian minimiser and the semi-Lagrangian segment
minimisation have closed forms. Such fields carry a ``metric`` (returning
``S, w1, w2`` at a point) that the solvers use, and a ``kernel`` code that the
compiled core understands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .grid import Point

# Problem codes shared with the compiled core (_core.pyx).
KIND_CONST = 0
KIND_HJB2 = 1
KIND_HJB3 = 2
KIND_HJB4 = 3
KIND_HJB5 = 4

PROBLEM_NAMES = ("isotropic", "hjb1", "hjb2", "hjb3", "hjb4", "hjb5")

_DEFAULTS = {
    "isotropic": {"speed": 1.0},
    "hjb1": {"lambda": 5.0, "mu": -10.0, "exponent": -0.5},
    "hjb2": {"amplitude": 0.9, "frequency": 2.0},
    "hjb3": {"lambda": 5.0, "mu": -10.0, "exponent": -0.5, "floor": 0.05},
    "hjb4": {"c1": 0.2, "c2": 3.0, "c3": 1.0, "c4": 0.0, "exponent": -0.5},
    "hjb5": {"c1": 0.2, "c2": 3.0, "c3": 1.0, "c4": 0.0, "exponent": -0.5},
}

BOUND_MARGIN = 0.05
_SAMPLES = 256


class ConfigurationError(ValueError):
    """Invalid problem or solver configuration."""


@dataclass(frozen=True)
class UnitDirection:
    theta: float

    @property
    def a(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    @classmethod
    def from_vector(cls, a1: float, a2: float) -> "UnitDirection":
        return cls(math.atan2(a2, a1) % (2 * math.pi))


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    params: dict = dc_field(default_factory=dict)
    target: tuple = ((0.0, 0.0),)
    domain: tuple = (-0.5, 0.5, -0.5, 0.5)
    scale: float = 1.0

    def __post_init__(self):
        if not self.target:
            raise ConfigurationError("target list is empty")


@dataclass(frozen=True, eq=False)
class SpeedField:
    """Scalar speed f(x, a) with declared bounds F1 <= f <= F2.

    ``func(x, y, a1, a2)`` evaluates one sample on Python floats, ``vfunc`` is
    the same formula on numpy arrays.
    """

    name: str
    func: Callable[[float, float, float, float], float]
    f1_bound: float
    f2_bound: float
    vfunc: Optional[Callable] = None
    metric: Optional[Callable[[float, float], tuple]] = None
    kernel: Optional[tuple] = None
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.f1_bound > 0:
            raise ConfigurationError(f"{self.name}: lower speed bound must be positive")
        if self.f2_bound < self.f1_bound:
            raise ConfigurationError(f"{self.name}: F2 < F1")

    @property
    def anisotropy(self) -> float:
        return self.f2_bound / self.f1_bound

    def evaluate(self, x, y, a1, a2):
        if self.vfunc is not None:
            return self.vfunc(x, y, a1, a2)
        return np.vectorize(self.func)(x, y, a1, a2)


def speed(field: SpeedField, x: Point, a) -> float:
    """f(x, a) for a unit direction (UnitDirection or 2-vector)."""
    a1, a2 = a.a if isinstance(a, UnitDirection) else a
    if abs(math.hypot(a1, a2) - 1.0) > 1e-9:
        raise ValueError(f"direction ({a1}, {a2}) is not a unit vector")
    return field.func(x[0], x[1], a1, a2)


def anisotropy_coefficient(field: SpeedField) -> float:
    if field.f1_bound <= 0:
        raise ConfigurationError("F1 must be positive")
    return field.f2_bound / field.f1_bound


def m_factor(p: float, q: float, a1: float, a2: float, exponent: float = -0.5) -> float:
    """(1 + (p a1 + q a2)^2) ** exponent."""
    t = p * a1 + q * a2
    return (1.0 + t * t) ** exponent


def elliptic_field(name, metric, vmetric, f1, f2, kernel=None, params=None):
    """Build a SpeedField f = S / sqrt(1 + (w . a)^2) from its coefficients."""

    def func(x, y, a1, a2):
        s, w1, w2 = metric(x, y)
        t = w1 * a1 + w2 * a2
        return s / math.sqrt(1.0 + t * t)

    def vfunc(x, y, a1, a2):
        s, w1, w2 = vmetric(np.asarray(x, float), np.asarray(y, float))
        t = w1 * a1 + w2 * a2
        return s / np.sqrt(1.0 + t * t)

    return SpeedField(name, func, f1, f2, vfunc=vfunc, metric=metric,
                      kernel=kernel, params=dict(params or {}))


def _general_field(name, vmetric, exponent, f1, f2, params):
    # Non-elliptic variant; only the generic numerical paths apply.
    def func(x, y, a1, a2):
        s, w1, w2 = vmetric(np.float64(x), np.float64(y))
        t = float(w1) * a1 + float(w2) * a2
        return float(s) * (1.0 + t * t) ** exponent

    def vfunc(x, y, a1, a2):
        s, w1, w2 = vmetric(np.asarray(x, float), np.asarray(y, float))
        t = w1 * a1 + w2 * a2
        return s * (1.0 + t * t) ** exponent

    return SpeedField(name, func, f1, f2, vfunc=vfunc, params=dict(params))


# --- coefficient functions -------------------------------------------------
# Scalar versions use ``math`` so that they match the compiled core bit for bit.


def _curve(c1, c2, c3, c4):
    k = c2 * math.pi / c3

    def c(x):
        return c1 * math.sin(k * x + c4)

    def dc(x):
        return c1 * k * math.cos(k * x + c4)

    def vc(x):
        return c1 * np.sin(k * x + c4), c1 * k * np.cos(k * x + c4)

    return c, dc, vc


def _hjb4_regions(y, c):
    return (0.5, 1.0) if y >= c else (2.0, 3.0)


def _hjb5_regions(y, c):
    if y > c + 0.25 or y <= c - 0.25:
        return (0.2, 0.8)
    if c < y <= c + 0.25:
        return (1.0, 3.0)
    return (1.0, 1.0)


def _coefficients(name, p, scale):
    """Return (scalar metric, vector metric, kernel params) for a problem."""
    if name == "isotropic":
        s = scale * p["speed"]

        def metric(x, y):
            return s, 0.0, 0.0

        def vmetric(x, y):
            z = np.zeros(np.broadcast(x, y).shape)
            return s + z, z, z

        return metric, vmetric, (KIND_CONST, (s, 0.0, 0.0))

    if name == "hjb1":
        lam, mu = p["lambda"], p["mu"]

        def metric(x, y):
            return scale, lam, mu

        def vmetric(x, y):
            z = np.zeros(np.broadcast(x, y).shape)
            return scale + z, lam + z, mu + z

        return metric, vmetric, (KIND_CONST, (scale, lam, mu))

    if name == "hjb2":
        amp, freq = p["amplitude"], p["frequency"]
        k = freq * math.pi

        def metric(x, y):
            return (scale,
                    amp * k * math.cos(k * x) * math.sin(k * y),
                    amp * k * math.sin(k * x) * math.cos(k * y))

        def vmetric(x, y):
            z = np.zeros(np.broadcast(x, y).shape)
            return (scale + z,
                    amp * k * np.cos(k * x) * np.sin(k * y) + z,
                    amp * k * np.sin(k * x) * np.cos(k * y) + z)

        return metric, vmetric, (KIND_HJB2, (scale, amp, k))

    if name == "hjb3":
        lam, mu, floor = p["lambda"], p["mu"], p["floor"]
        if not floor > 0:
            raise ConfigurationError("hjb3 floor must be positive")

        def metric(x, y):
            return scale * max(1.0 + x + y, floor), lam, mu

        def vmetric(x, y):
            z = np.zeros(np.broadcast(x, y).shape)
            return scale * np.maximum(1.0 + x + y, floor) + z, lam + z, mu + z

        return metric, vmetric, (KIND_HJB3, (scale, lam, mu, floor))

    if name in ("hjb4", "hjb5"):
        c1, c2, c3, c4 = (p[k] for k in ("c1", "c2", "c3", "c4"))
        if min(c1, c2, c3) <= 0 or c4 < 0:
            raise ConfigurationError(f"{name}: need c1, c2, c3 > 0 and c4 >= 0")
        c, dc, vc = _curve(c1, c2, c3, c4)
        regions = _hjb4_regions if name == "hjb4" else _hjb5_regions

        def metric(x, y):
            lo, hi = regions(y, c(x))
            m = hi / lo
            return scale * hi, m * dc(x), -m

        if name == "hjb4":
            def vregions(y, cx):
                upper = y >= cx
                return np.where(upper, 0.5, 2.0), np.where(upper, 1.0, 3.0)
        else:
            def vregions(y, cx):
                outer = (y > cx + 0.25) | (y <= cx - 0.25)
                band = (cx < y) & (y <= cx + 0.25)
                lo = np.where(outer, 0.2, 1.0)
                hi = np.where(outer, 0.8, np.where(band, 3.0, 1.0))
                return lo, hi

        def vmetric(x, y):
            x, y = np.broadcast_arrays(x, y)
            cx, dcx = vc(x)
            lo, hi = vregions(y, cx)
            m = hi / lo
            return scale * hi, m * dcx, -m

        code = KIND_HJB4 if name == "hjb4" else KIND_HJB5
        return metric, vmetric, (code, (scale, c1, c2 * math.pi / c3, c4))

    raise ConfigurationError(f"unknown problem {name!r}")


def _sampled_extremes(vmetric, domain, exponent, n=_SAMPLES):
    """Speed extremes over an n x n spatial lattice.

    The angular extremes of S (1 + (w.a)^2)^e are exact: S and
    S (1 + |w|^2)^e, attained at w.a = 0 and a parallel to w.
    """
    xs = np.linspace(domain[0], domain[1], n)
    ys = np.linspace(domain[2], domain[3], n)
    X, Y = np.meshgrid(xs, ys)
    s, w1, w2 = vmetric(X, Y)
    other = s * (1.0 + w1 * w1 + w2 * w2) ** exponent
    lo = np.minimum(s, other)
    hi = np.maximum(s, other)
    return float(lo.min()), float(hi.max())


def make_problem(spec: ProblemSpec) -> SpeedField:
    if spec.name not in _DEFAULTS:
        raise ConfigurationError(f"unknown problem {spec.name!r}")
    defaults = _DEFAULTS[spec.name]
    unknown = set(spec.params) - set(defaults)
    if unknown:
        raise ConfigurationError(f"{spec.name}: unknown parameters {sorted(unknown)}")
    p = {**defaults, **{k: float(v) for k, v in spec.params.items()}}
    if not spec.scale > 0:
        raise ConfigurationError("speed scale must be positive")
    exponent = p.pop("exponent", -0.5)
    if exponent not in (-0.5, 0.5):
        raise ConfigurationError("exponent must be -0.5 or 0.5")
    if spec.name == "isotropic" and not p["speed"] > 0:
        raise ConfigurationError("isotropic speed must be positive")

    metric, vmetric, kernel = _coefficients(spec.name, p, spec.scale)

    if spec.name in ("isotropic", "hjb1", "hjb3"):
        # analytic bounds
        if spec.name == "isotropic":
            f1 = f2 = spec.scale * p["speed"]
        else:
            ext = (1.0 + p["lambda"] ** 2 + p["mu"] ** 2) ** exponent
            smin, smax = spec.scale, spec.scale
            if spec.name == "hjb3":
                x0, x1, y0, y1 = spec.domain
                smin = spec.scale * max(1.0 + x0 + y0, p["floor"])
                smax = spec.scale * max(1.0 + x1 + y1, p["floor"])
            f1, f2 = smin * min(1.0, ext), smax * max(1.0, ext)
    else:
        f1, f2 = _sampled_extremes(vmetric, spec.domain, exponent)
        f1 *= 1.0 - BOUND_MARGIN
        f2 *= 1.0 + BOUND_MARGIN

    params = {**p, "exponent": exponent}
    if exponent == -0.5:
        return elliptic_field(spec.name, metric, vmetric, f1, f2, kernel=kernel, params=params)
    return _general_field(spec.name, vmetric, exponent, f1, f2, params)


@dataclass
class BoundsReport:
    observed_min: float
    observed_max: float
    declared_min: float
    declared_max: float

    @property
    def ok(self) -> bool:
        return (self.observed_min >= self.declared_min * (1 - 1e-9)
                and self.observed_max <= self.declared_max * (1 + 1e-9))


def validate_bounds(field: SpeedField, n_x_samples: int = 64, n_angle_samples: int = 256,
                    domain=(-0.5, 0.5, -0.5, 0.5)) -> BoundsReport:
    """Sample f on a spatial x angular lattice and compare with the declared bounds."""
    if n_x_samples < 16 or n_angle_samples < 16:
        raise ValueError("need at least 16 samples per axis")
    xs = np.linspace(domain[0], domain[1], n_x_samples)
    ys = np.linspace(domain[2], domain[3], n_x_samples)
    X, Y = np.meshgrid(xs, ys)
    lo, hi = math.inf, -math.inf
    for th in np.linspace(0.0, 2 * np.pi, n_angle_samples, endpoint=False):
        vals = field.evaluate(X, Y, math.cos(th), math.sin(th))
        lo = min(lo, float(np.min(vals)))
        hi = max(hi, float(np.max(vals)))
    return BoundsReport(lo, hi, field.f1_bound, field.f2_bound)


def custom_field(func: Callable[[float, float, float, float], float], f1: float, f2: float,
                 name: str = "custom") -> SpeedField:
    """Wrap an arbitrary scalar speed ``func(x, y, a1, a2)``."""
    return SpeedField(name, func, f1, f2)
