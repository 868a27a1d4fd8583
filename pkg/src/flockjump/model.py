"""Jump-rate families, jump-length laws, and the shared particle configuration state.

The jump rate w is a positive, non-increasing function of a particle's position
relative to the center of mass; particles behind the center jump faster. Five
rate families are supported (exponential, step, piecewise-linear, arccot, and a
bounded tabulated function), each exposing both a pointwise evaluation and the
exact antiderivative of w from 0, which the traveling-wave solver needs at full
precision. Jump lengths are normalized to mean 1 with a finite third moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# exp(-beta*x) overflows double precision past ~709; clamp the exponent well inside.
EXP_CLAMP = 700.0

# Full re-summation cadence for the cached position sum (bounds float drift).
RESUM_INTERVAL = 100_000


class ModelError(ValueError):
    """Invalid model specification or state."""


class DomainError(ModelError):
    """Argument outside the operation's domain."""


# ---------------------------------------------------------------------------
# jump rate families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialRate:
    """w(x) = exp(-beta*x). Unbounded on the left, vanishes on the right."""

    beta: float = 1.0

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ModelError(f"beta must be positive and finite, got {self.beta}")

    bounded = False
    continuous = True
    knots: tuple = ()

    @property
    def left_limit(self):
        return math.inf

    @property
    def right_limit(self):
        return 0.0

    def rate(self, x):
        z = np.clip(np.multiply(self.beta, x), -EXP_CLAMP, EXP_CLAMP)
        return np.exp(-z)

    def integral(self, x):
        """Exact antiderivative of w from 0 to x: (1 - exp(-beta*x)) / beta."""
        z = np.clip(np.multiply(self.beta, x), -EXP_CLAMP, EXP_CLAMP)
        return (1.0 - np.exp(-z)) / self.beta

    def __call__(self, x):
        return self.rate(x)


@dataclass(frozen=True)
class StepRate:
    """w(x) = a for x < 0, b for x >= 0, with a > b > 0."""

    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > self.b > 0):
            raise ModelError(f"step rates need a > b > 0, got a={self.a}, b={self.b}")

    bounded = True
    continuous = False
    knots = (0.0,)

    @property
    def left_limit(self):
        return self.a

    @property
    def right_limit(self):
        return self.b

    def rate(self, x):
        return np.where(np.less(x, 0.0), self.a, self.b)

    def integral(self, x):
        return np.where(np.less(x, 0.0), self.a * np.asarray(x), self.b * np.asarray(x))

    def __call__(self, x):
        return self.rate(x)


@dataclass(frozen=True)
class PiecewiseLinearRate:
    """Continuous rate: a left of -1, b right of 1, linear in between (a > b > 0)."""

    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > self.b > 0):
            raise ModelError(f"piecewise-linear rates need a > b > 0, got a={self.a}, b={self.b}")

    bounded = True
    continuous = True
    knots = (-1.0, 1.0)

    @property
    def left_limit(self):
        return self.a

    @property
    def right_limit(self):
        return self.b

    def rate(self, x):
        x = np.asarray(x, dtype=float)
        mid = 0.5 * (self.a + self.b) - 0.5 * (self.a - self.b) * x
        return np.where(x < -1.0, self.a, np.where(x > 1.0, self.b, mid))

    def integral(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.a, self.b
        # On [-1, 1]: int_0^x w = (a+b)/2 * x - (a-b)/4 * x^2.
        mid = 0.5 * (a + b) * x - 0.25 * (a - b) * x * x
        at_hi = 0.5 * (a + b) - 0.25 * (a - b)
        at_lo = -0.5 * (a + b) - 0.25 * (a - b)
        return np.where(x < -1.0, at_lo + a * (x + 1.0),
                        np.where(x > 1.0, at_hi + b * (x - 1.0), mid))

    def __call__(self, x):
        return self.rate(x)


@dataclass(frozen=True)
class ArccotRate:
    """w(x) = arccot(x) on (0, pi), the smooth monotone example."""

    bounded = True
    continuous = True
    knots: tuple = ()

    @property
    def left_limit(self):
        return math.pi

    @property
    def right_limit(self):
        return 0.0

    def rate(self, x):
        return 0.5 * math.pi - np.arctan(x)

    def integral(self, x):
        x = np.asarray(x, dtype=float)
        return x * (0.5 * math.pi - np.arctan(x)) + 0.5 * np.log1p(x * x)

    def __call__(self, x):
        return self.rate(x)


@dataclass(frozen=True)
class TabulatedRate:
    """Bounded rate given by a table, linearly interpolated, flat beyond the grid.

    The flat extension keeps the rate bounded and non-increasing; the declared
    left limit must equal the supremum of the tabulated values.
    """

    grid: tuple
    values: tuple
    left_limit: float = None
    right_limit: float = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size < 2 or v.shape != g.shape:
            raise ModelError("tabulated rate needs matching 1-d grid and values with >= 2 points")
        if not np.all(np.diff(g) > 0):
            raise ModelError("tabulated grid must be strictly ascending")
        if not np.all(v > 0):
            raise ModelError("tabulated values must be strictly positive")
        if not np.all(np.diff(v) <= 0):
            raise ModelError("tabulated values must be non-increasing")
        object.__setattr__(self, "grid", tuple(float(x) for x in g))
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        if self.left_limit is None:
            object.__setattr__(self, "left_limit", float(v[0]))
        if self.right_limit is None:
            object.__setattr__(self, "right_limit", float(v[-1]))
        if self.left_limit != float(v[0]):
            raise ModelError(
                f"declared left limit {self.left_limit} != sup of values {v[0]}")
        if self.right_limit != float(v[-1]):
            raise ModelError(
                f"declared right limit {self.right_limit} != last value {v[-1]}")

    bounded = True
    continuous = True

    @property
    def knots(self):
        return self.grid

    def rate(self, x):
        return np.interp(x, self.grid, self.values)

    def integral(self, x):
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        # Cumulative integral at the knots (trapezoid is exact for a linear interpolant).
        knot_cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(g))])

        def cum_from_left(y):
            y = np.asarray(y, dtype=float)
            below = v[0] * (y - g[0])
            above = knot_cum[-1] + v[-1] * (y - g[-1])
            idx = np.clip(np.searchsorted(g, y, side="right") - 1, 0, len(g) - 2)
            gl, gr = g[idx], g[idx + 1]
            vl, vr = v[idx], v[idx + 1]
            frac = np.where(gr > gl, (y - gl) / (gr - gl), 0.0)
            seg = (vl + 0.5 * frac * (vr - vl)) * (y - gl)
            inside = knot_cum[idx] + seg
            return np.where(y < g[0], below, np.where(y > g[-1], above, inside))

        return cum_from_left(x) - cum_from_left(0.0)

    def __call__(self, x):
        return self.rate(x)


RATE_FAMILIES = (ExponentialRate, StepRate, PiecewiseLinearRate, ArccotRate, TabulatedRate)


def constant_rate(a: float, half_width: float = 1.0) -> TabulatedRate:
    """Flat tabulated rate w == a (useful as the degenerate bounded case)."""
    return TabulatedRate(grid=(-half_width, half_width), values=(a, a))


def rate_eval(spec, x):
    """Evaluate the jump rate w(x); rejects non-finite arguments."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("rate_eval requires finite x")
    out = spec.rate(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def rate_integral(spec, x):
    """Exact integral of w from 0 to x (closed form per family)."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("rate_integral requires finite x")
    out = spec.integral(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# jump length laws (EZ = 1, finite third moment)
# ---------------------------------------------------------------------------

_LAGUERRE_NODES, _LAGUERRE_WEIGHTS = np.polynomial.laguerre.laggauss(64)


@dataclass(frozen=True)
class DeterministicJump:
    """Every jump has length exactly 1."""

    mean = 1.0
    second_moment = 1.0
    third_moment = 1.0

    def sample(self, rng, size=None):
        if size is None:
            return 1.0
        return np.ones(size)

    def expect_shifted(self, f, x):
        """E f(x + Z) = f(x + 1)."""
        return f(np.asarray(x, dtype=float) + 1.0)


@dataclass(frozen=True)
class ExponentialJump:
    """Mean-one exponential jump length."""

    mean = 1.0
    second_moment = 2.0
    third_moment = 6.0

    def sample(self, rng, size=None):
        if size is None:
            return float(rng.standard_exponential())
        return rng.standard_exponential(size)

    def expect_shifted(self, f, x):
        """E f(x + Z) by 64-point Gauss-Laguerre (exact weight exp(-u))."""
        x = np.asarray(x, dtype=float)
        vals = f(x[..., None] + _LAGUERRE_NODES)
        return vals @ _LAGUERRE_WEIGHTS


@dataclass(frozen=True)
class CustomDensityJump:
    """User-supplied jump density on [0, inf) with declared unit mean.

    The density is validated by quadrature at construction (mass 1, mean 1);
    the declared third moment must be finite. A sampler must be provided.
    """

    density: callable
    sampler: callable
    third_moment: float
    upper: float = 50.0

    mean = 1.0

    def __post_init__(self):
        from scipy.integrate import quad

        if not math.isfinite(self.third_moment):
            raise ModelError("jump length law must declare a finite third moment")
        mass, _ = quad(self.density, 0.0, self.upper, limit=200)
        m1, _ = quad(lambda u: u * self.density(u), 0.0, self.upper, limit=200)
        if abs(mass - 1.0) > 1e-6:
            raise ModelError(f"custom jump density has mass {mass:.8g}, expected 1")
        if abs(m1 - 1.0) > 1e-6:
            raise ModelError(f"custom jump density has mean {m1:.8g}, expected 1 (EZ = 1)")
        m2, _ = quad(lambda u: u * u * self.density(u), 0.0, self.upper, limit=200)
        object.__setattr__(self, "second_moment", m2)

    def sample(self, rng, size=None):
        out = self.sampler(rng, size if size is not None else 1)
        out = np.asarray(out, dtype=float)
        if np.any(out < 0):
            raise ModelError("custom jump sampler returned a negative length")
        return float(out[0]) if size is None else out

    def expect_shifted(self, f, x):
        """E f(x + Z) by 64-point Gauss-Legendre against the density on [0, upper]."""
        nodes, weights = np.polynomial.legendre.leggauss(64)
        u = 0.5 * self.upper * (nodes + 1.0)
        wts = 0.5 * self.upper * weights * self.density(u)
        x = np.asarray(x, dtype=float)
        return f(x[..., None] + u) @ wts


def sample_jump(spec, rng):
    """Draw a single jump length (>= 0) from the specified law."""
    return spec.sample(rng)


# ---------------------------------------------------------------------------
# particle configuration state
# ---------------------------------------------------------------------------


@dataclass
class SystemState:
    """Positions of the n particles, the simulation clock, and a cached sum.

    The position sum is updated incrementally (O(1) per jump) and re-summed
    every RESUM_INTERVAL events to bound floating-point drift. Confined to a
    single simulation run; not shared across threads.
    """

    positions: np.ndarray
    time: float = 0.0
    pos_sum: float = field(default=None)
    _events_since_resum: int = field(default=0, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 1 or self.positions.size == 0:
            raise DomainError("SystemState needs a non-empty 1-d position array")
        if self.pos_sum is None:
            self.pos_sum = float(self.positions.sum())
        if self.time < 0:
            raise DomainError("time must be >= 0")

    @property
    def n(self) -> int:
        return self.positions.size

    @property
    def center(self) -> float:
        return self.pos_sum / self.positions.size

    def apply_jump(self, index: int, length: float, new_time: float = None):
        """Move one particle forward and refresh the cached sum."""
        if length < 0:
            raise ModelError(f"jump length must be >= 0, got {length}")
        if new_time is not None:
            if new_time < self.time:
                raise ModelError("time must be non-decreasing")
            self.time = new_time
        self.positions[index] += length
        self.pos_sum += length
        self._events_since_resum += 1
        if self._events_since_resum >= RESUM_INTERVAL:
            self.pos_sum = float(self.positions.sum())
            self._events_since_resum = 0

    def resum(self):
        self.pos_sum = float(self.positions.sum())
        self._events_since_resum = 0


def center_of_mass(state: SystemState) -> float:
    """Mean position m = pos_sum / n."""
    return state.center


def initial_state(n: int, init="zeros", rng=None) -> SystemState:
    """Build the starting configuration.

    init is "zeros" (every particle at 0), an explicit position list/array, or
    ("iid", sampler) where sampler(rng, n) draws the initial positions.
    """
    if isinstance(init, str):
        if init != "zeros":
            raise ModelError(f"unknown initial condition {init!r}")
        pos = np.zeros(n)
    elif isinstance(init, tuple) and len(init) == 2 and init[0] == "iid":
        if rng is None:
            raise ModelError("iid initial condition needs an rng")
        pos = np.asarray(init[1](rng, n), dtype=float)
        if pos.shape != (n,):
            raise ModelError("iid sampler must return n positions")
    else:
        pos = np.asarray(init, dtype=float)
        if pos.shape != (n,):
            raise ModelError(f"explicit initial positions must have length n={n}")
    return SystemState(positions=pos)
