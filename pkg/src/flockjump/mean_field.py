"""Traveling-wave profiles, wave speeds, closed-form stationary densities, and a
forward integrator for the mean-field evolution of the particle density.

For mean-one exponential jump lengths the traveling profile is
rho(x) = K exp(int_0^x (w(s)/c - 1) ds) for any non-constant rate w; the wave
speed c is pinned by centering the normalized profile. Each rate family exposes
an exact antiderivative of w, so profile exponents carry no quadrature error;
only normalizations and moments are integrated numerically (adaptive
Gauss-Kronrod, forced to subdivide at the rate function's knots).

The PDE integrator discretizes the jump term by projecting the exponential jump
law onto the grid cell-by-cell, splitting each cell's mass between its two
nodes so that mass and the within-cell mean are preserved exactly. The
resulting kernel is geometric in the node offset, so the update runs in O(grid)
via a left-to-right recursion, and discrete mass conservation plus the discrete
speed-of-mean identity hold to floating-point roundoff by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.signal import lfilter

from .model import (
    ArccotRate,
    DomainError,
    ExponentialRate,
    ModelError,
    PiecewiseLinearRate,
    StepRate,
)

EULER_GAMMA = 0.5772156649015329


class NonIntegrableError(ModelError):
    """The requested profile is not normalizable (c outside (w(+inf), w(-inf)))."""


class SolverError(ModelError):
    """Wave-speed bracketing or bisection failed."""


class StepSizeError(ModelError):
    """Explicit Euler step exceeds the stability budget dt <= 0.5 / sup w."""


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------


def digamma(x: float) -> float:
    """Digamma psi(x) = Gamma'(x)/Gamma(x) for x > 0.

    Upward recurrence psi(x+1) = psi(x) + 1/x pushes the argument above 7,
    then the standard asymptotic series; absolute error below 1e-10.
    """
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 7.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 *
              (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760))))))
    return acc + math.log(x) - 0.5 * inv - inv2 * series


def upper_gamma_regularized(k: int, z) -> np.ndarray:
    """Q(k, z) = e^{-z} sum_{j<k} z^j / j! for integer k >= 1 (Poisson tail)."""
    if k < 1 or k != int(k):
        raise DomainError(f"integer order k >= 1 required, got {k}")
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for j in range(1, int(k)):
        term = term * z / j
        total = total + term
    return np.exp(-z) * total


# ---------------------------------------------------------------------------
# traveling-wave profile and speed
# ---------------------------------------------------------------------------


def log_profile(w, c: float, x):
    """Exponent of the unnormalized profile: int_0^x (w(s)/c - 1) ds, exact."""
    x = np.asarray(x, dtype=float)
    return w.integral(x) / c - x


def _check_speed_bracket(w, c: float):
    if not (math.isfinite(c) and w.right_limit < c < w.left_limit):
        raise NonIntegrableError(
            f"speed c={c} must lie strictly inside (w(+inf), w(-inf)) = "
            f"({w.right_limit}, {w.left_limit}); a constant rate admits no wave")


def _exponent_argmax(w, c: float) -> float:
    """Locate the profile peak: the crossing w(x) = c (the exponent is concave)."""
    lo, hi = -1.0, 1.0
    for _ in range(600):
        if float(w(lo)) > c:
            break
        lo *= 2.0
    else:
        raise SolverError(f"could not bracket w(x) = {c} on the left")
    for _ in range(600):
        if float(w(hi)) < c:
            break
        hi *= 2.0
    else:
        raise SolverError(f"could not bracket w(x) = {c} on the right")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(w(mid)) > c:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def profile_bounds(w, c: float, drop: float = 60.0):
    """Interval outside which the profile is below exp(-drop) of its peak."""
    _check_speed_bracket(w, c)
    x_star = _exponent_argmax(w, c)
    e_star = float(log_profile(w, c, x_star))
    target = e_star - drop

    def expand(direction):
        step = 1.0
        x = x_star + direction * step
        for _ in range(600):
            if float(log_profile(w, c, x)) < target:
                break
            step *= 2.0
            x = x_star + direction * step
        else:
            raise SolverError("profile tail does not decay; c is outside the admissible bracket")
        inner, outer = x_star, x
        for _ in range(80):
            mid = 0.5 * (inner + outer)
            if float(log_profile(w, c, mid)) < target:
                outer = mid
            else:
                inner = mid
        return outer

    return expand(-1.0), expand(+1.0)


def _quad_points(w, lo, hi, extra=()):
    pts = sorted(p for p in (*w.knots, *extra) if lo < p < hi)
    return pts or None


def profile_moments(w, c: float, drop: float = 60.0):
    """(mass, first moment) of exp(log_profile - peak) by adaptive quadrature."""
    x_lo, x_hi = profile_bounds(w, c, drop)
    x_star = _exponent_argmax(w, c)
    e_star = float(log_profile(w, c, x_star))

    def f0(x):
        return math.exp(float(log_profile(w, c, x)) - e_star)

    pts = _quad_points(w, x_lo, x_hi, extra=(x_star,))
    i0, _ = quad(f0, x_lo, x_hi, points=pts, limit=400, epsabs=0.0, epsrel=1e-12)
    # The moment vanishes at the wave speed, so it needs an absolute floor.
    i1, _ = quad(lambda x: x * f0(x), x_lo, x_hi, points=pts, limit=400,
                 epsabs=1e-12 * i0, epsrel=1e-12)
    return i0, i1, e_star


@dataclass(frozen=True)
class WaveProfile:
    """Gridded traveling-wave density with exact off-grid evaluation.

    `values` are normalized so the trapezoid integral over `grid` is 1;
    `density_at` evaluates K * exp(exponent) exactly at arbitrary points.
    """

    grid: np.ndarray
    values: np.ndarray
    c: float
    K: float
    w: object
    log_norm: float

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def density_at(self, x, shift: float = 0.0):
        """Exact normalized density at x (optionally for the profile moved by `shift`)."""
        e = log_profile(self.w, self.c, np.asarray(x, dtype=float) - shift)
        return np.exp(e + self.log_norm)

    def trapz_mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def trapz_mean(self) -> float:
        return float(np.trapezoid(self.grid * self.values, self.grid))


def wave_profile(w, c: float, h: float = None, drop: float = 60.0,
                 grid: np.ndarray = None) -> WaveProfile:
    """Construct the normalized traveling-wave profile at speed c.

    The default spacing is 0.005; a discontinuous rate kinks the density, so
    the step family defaults to 0.001 to keep the trapezoid mass within 1e-8.
    """
    _check_speed_bracket(w, c)
    if h is None:
        h = 0.005 if w.continuous else 0.001
    if grid is None:
        x_lo, x_hi = profile_bounds(w, c, drop)
        # Align nodes with multiples of h so rate knots (integers, 0) fall on nodes.
        j_lo = math.floor(x_lo / h) - 1
        j_hi = math.ceil(x_hi / h) + 1
        grid = h * np.arange(j_lo, j_hi + 1)
    grid = np.asarray(grid, dtype=float)
    i0, _i1, e_star = profile_moments(w, c, drop)
    log_norm = -(e_star + math.log(i0))
    exponents = log_profile(w, c, grid) + log_norm
    with np.errstate(under="ignore"):
        values = np.exp(exponents)
    tz = np.trapezoid(values, grid)
    if not (tz > 0 and math.isfinite(tz)):
        raise NonIntegrableError("profile is not normalizable on the requested grid")
    return WaveProfile(grid=grid, values=values, c=c, K=math.exp(log_norm),
                       w=w, log_norm=log_norm)


def profile_mean(w, c: float, drop: float = 60.0) -> float:
    i0, i1, _ = profile_moments(w, c, drop)
    return i1 / i0


def wave_speed(w, mean_tol: float = 1e-10, max_iter: int = 200,
               report: dict = None) -> float:
    """Speed of the traveling wave: the c at which the profile is centered.

    Bisection on the normalized profile's first moment over
    (w(+inf), w(-inf)); the sign change at the bracket ends is verified (and
    recorded in `report` if given) rather than assumed from monotonicity.
    """
    w_right, w_left = w.right_limit, w.left_limit
    if not (w_left > w_right):
        raise SolverError("constant rate function has no traveling wave speed")

    if math.isfinite(w_left):
        c0 = 0.5 * (w_left + w_right)
    else:
        c0 = max(float(w(0.0)), 2.0 * w_right + 1.0)

    # Expand upward until the centered moment goes negative.
    c_hi = c0
    for _ in range(200):
        if profile_mean(w, c_hi) < 0:
            break
        c_hi = 0.5 * (c_hi + w_left) if math.isfinite(w_left) else 2.0 * c_hi
    else:
        raise SolverError(f"no c with negative profile mean found below w(-inf)={w_left}")
    # Expand downward (toward w(+inf)) until the moment goes positive.
    c_lo = c0
    for _ in range(200):
        if profile_mean(w, c_lo) > 0:
            break
        c_lo = 0.5 * (c_lo + w_right)
    else:
        raise SolverError(f"no c with positive profile mean found above w(+inf)={w_right}")

    m_lo, m_hi = profile_mean(w, c_lo), profile_mean(w, c_hi)
    if not (m_lo > 0 > m_hi):
        raise SolverError(
            f"bracket endpoints do not straddle zero moment: "
            f"mean({c_lo})={m_lo:.6g}, mean({c_hi})={m_hi:.6g}")
    if report is not None:
        report.update(bracket=(c_lo, c_hi), endpoint_means=(m_lo, m_hi),
                      moment_decreasing=m_lo > m_hi)

    c = 0.5 * (c_lo + c_hi)
    for _ in range(max_iter):
        c = 0.5 * (c_lo + c_hi)
        m = profile_mean(w, c)
        if abs(m) < mean_tol:
            break
        if m > 0:
            c_lo = c
        else:
            c_hi = c
        if c_hi - c_lo < 1e-13 * max(1.0, abs(c)):
            break
    return c


# ---------------------------------------------------------------------------
# closed-form stationary densities (exponential jump lengths)
# ---------------------------------------------------------------------------


def gumbel_wave_pdf(beta: float, x):
    """Stationary density for w(x) = e^{-beta x}: generalized Gumbel, centered."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    s = digamma(1.0 / beta) / beta
    y = np.asarray(x, dtype=float) - s
    with np.errstate(under="ignore", over="ignore"):
        z = np.exp(-np.clip(beta * y, -700.0, 700.0))
        out = (beta / math.gamma(1.0 / beta)) * np.exp(-y - z)
    return out


def gumbel_wave_cdf(beta: float, x):
    """CDF of the centered generalized Gumbel wave (closed form at integer 1/beta)."""
    s = digamma(1.0 / beta) / beta
    y = np.asarray(x, dtype=float) - s
    k = 1.0 / beta
    if abs(k - round(k)) < 1e-12:
        with np.errstate(over="ignore"):
            z = np.exp(-np.clip(beta * y, -700.0, 700.0))
        return upper_gamma_regularized(int(round(k)), z)
    return _numeric_cdf(lambda t: gumbel_wave_pdf(beta, t), -20.0 / beta - 5.0, 60.0)(x)


def laplace_wave_pdf(a: float, b: float, x):
    """Stationary density for the step rate: Laplace with rate (a-b)/(a+b)."""
    r = (a - b) / (a + b)
    return 0.5 * r * np.exp(-r * np.abs(np.asarray(x, dtype=float)))


def laplace_wave_cdf(a: float, b: float, x):
    r = (a - b) / (a + b)
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(r * np.where(x < 0, x, 0.0)),
                    1.0 - 0.5 * np.exp(-r * np.where(x >= 0, x, 0.0)))


@lru_cache(maxsize=None)
def _piecewise_gauss_exp_norm(a: float, b: float) -> float:
    w = PiecewiseLinearRate(a, b)
    c = 0.5 * (a + b)
    i0, _, e_star = profile_moments(w, c)
    # exponent at 0 is 0, so K = 1 / integral of exp(exponent)
    return 1.0 / (i0 * math.exp(e_star))


def piecewise_gauss_exp_pdf(a: float, b: float, x):
    """Example density for the piecewise-linear rate: Gaussian core, exponential tails."""
    w = PiecewiseLinearRate(a, b)
    c = 0.5 * (a + b)
    return _piecewise_gauss_exp_norm(a, b) * np.exp(log_profile(w, c, x))


@lru_cache(maxsize=None)
def _arccot_norm() -> float:
    w = ArccotRate()
    c = 0.5 * math.pi
    i0, _, e_star = profile_moments(w, c)
    return 1.0 / (i0 * math.exp(e_star))


def arccot_wave_pdf(x):
    """Stationary density for the arccot rate at its symmetric speed pi/2."""
    w = ArccotRate()
    return _arccot_norm() * np.exp(log_profile(w, 0.5 * math.pi, x))


def closed_form_density(family: str, x, **params):
    """Evaluate one of the named closed-form stationary densities."""
    if family == "generalized_gumbel":
        return gumbel_wave_pdf(params["beta"], x)
    if family == "laplace":
        return laplace_wave_pdf(params["a"], params["b"], x)
    if family == "piecewise_gauss_exp":
        return piecewise_gauss_exp_pdf(params["a"], params["b"], x)
    if family == "arccot":
        return arccot_wave_pdf(x)
    raise DomainError(f"unknown closed-form family {family!r}")


def _numeric_cdf(pdf, lo: float, hi: float, npts: int = 120_001):
    xs = np.linspace(lo, hi, npts)
    vals = np.asarray(pdf(xs), dtype=float)
    h = xs[1] - xs[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * h)])
    cum = np.clip(cum / cum[-1], 0.0, 1.0)

    def cdf(x):
        return np.interp(x, xs, cum, left=0.0, right=1.0)

    return cdf


@dataclass(frozen=True)
class StationaryWave:
    """Matching mean-field stationary law for a rate family: speed, pdf, cdf."""

    c: float
    pdf: object
    cdf: object
    label: str


def stationary_wave(w) -> StationaryWave:
    """Closed-form stationary wave when the family has one, numeric otherwise."""
    if isinstance(w, ExponentialRate):
        beta = w.beta
        c = math.exp(-digamma(1.0 / beta)) / beta
        return StationaryWave(c=c, pdf=lambda x: gumbel_wave_pdf(beta, x),
                              cdf=lambda x: gumbel_wave_cdf(beta, x),
                              label=f"generalized_gumbel(beta={beta})")
    if isinstance(w, StepRate):
        a, b = w.a, w.b
        return StationaryWave(c=0.5 * (a + b), pdf=lambda x: laplace_wave_pdf(a, b, x),
                              cdf=lambda x: laplace_wave_cdf(a, b, x),
                              label=f"laplace(a={a},b={b})")
    if isinstance(w, PiecewiseLinearRate):
        a, b = w.a, w.b
        cdf = _numeric_cdf(lambda x: piecewise_gauss_exp_pdf(a, b, x), -60.0, 60.0)
        return StationaryWave(c=0.5 * (a + b), pdf=lambda x: piecewise_gauss_exp_pdf(a, b, x),
                              cdf=cdf, label=f"piecewise_gauss_exp(a={a},b={b})")
    if isinstance(w, ArccotRate):
        cdf = _numeric_cdf(arccot_wave_pdf, -80.0, 120.0)
        return StationaryWave(c=0.5 * math.pi, pdf=arccot_wave_pdf, cdf=cdf, label="arccot")
    # Generic bounded family: solve for the speed and use the exact profile.
    c = wave_speed(w)
    prof = wave_profile(w, c)
    lo, hi = prof.grid[0], prof.grid[-1]
    cdf = _numeric_cdf(prof.density_at, lo, hi)
    return StationaryWave(c=c, pdf=prof.density_at, cdf=cdf, label=f"numeric({type(w).__name__})")


# ---------------------------------------------------------------------------
# speed of the mean
# ---------------------------------------------------------------------------


def mean_speed_arrays(grid, values, m: float, w) -> float:
    """Trapezoid quadrature of w(y - m) * rho(y): the instantaneous speed of the mean."""
    grid = np.asarray(grid, dtype=float)
    return float(np.trapezoid(w.rate(grid - m) * np.asarray(values, dtype=float), grid))


def mean_speed(field: "DensityField", w) -> float:
    """Speed of the mean for a density field (the field must be normalized)."""
    return mean_speed_arrays(field.grid, field.values, field.mean, w)


# ---------------------------------------------------------------------------
# traveling-wave equation residual (verification of the profile construction)
# ---------------------------------------------------------------------------


def wave_equation_residual(w, c: float = None, h: float = 0.002, drop: float = 50.0) -> float:
    """Sup-norm residual of -c rho' + w rho - int_{-inf}^x w rho e^{-(x-y)} dy = 0.

    rho is the normalized profile; rho' uses a 5-point stencil; the convolution
    uses per-cell 2-point Gauss-Legendre against the exact density, chained by
    the left-to-right exponential recursion. Nodes whose stencils straddle a
    rate knot are skipped (one-sided limits satisfy the equation separately).
    """
    if c is None:
        c = wave_speed(w)
    prof = wave_profile(w, c, h=h, drop=drop)
    grid = prof.grid
    rho = prof.density_at(grid)
    wv = np.asarray(w.rate(grid), dtype=float)

    # Per-cell integral of w(y) rho(y) e^{-(x_{j+1} - y)} by 2-pt Gauss-Legendre.
    gl = 1.0 / math.sqrt(3.0)
    mids = 0.5 * (grid[:-1] + grid[1:])
    contrib = np.zeros(len(grid) - 1)
    for off in (-gl, gl):
        y = mids + 0.5 * h * off
        contrib += 0.5 * h * np.asarray(w.rate(y), dtype=float) * prof.density_at(y) \
            * np.exp(-(grid[1:] - y))
    decay = math.exp(-h)
    conv = np.empty_like(rho)
    conv[0] = 0.0
    conv[1:] = lfilter([1.0], [1.0, -decay], contrib)

    # 5-point derivative, skipping stencils that straddle a knot.
    idx = np.arange(2, len(grid) - 2)
    drho = (rho[idx - 2] - 8 * rho[idx - 1] + 8 * rho[idx + 1] - rho[idx + 2]) / (12 * h)
    resid = -c * drho + wv[idx] * rho[idx] - conv[idx]
    keep = np.ones(len(idx), dtype=bool)
    for knot in w.knots:
        keep &= np.abs(grid[idx] - knot) > 2.5 * h
    return float(np.max(np.abs(resid[keep])))


# ---------------------------------------------------------------------------
# mean-field PDE (exponential jump kernel)
# ---------------------------------------------------------------------------


@dataclass
class DensityField:
    """Density samples on a uniform absolute grid; the mean is the grid first moment."""

    grid: np.ndarray
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise ModelError("grid and values must be matching 1-d arrays")

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    @property
    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.values, self.grid) / self.mass)

    @classmethod
    def gaussian(cls, grid, center: float = 0.0, sigma: float = 0.1) -> "DensityField":
        grid = np.asarray(grid, dtype=float)
        with np.errstate(under="ignore"):
            vals = np.exp(-0.5 * ((grid - center) / sigma) ** 2)
        vals /= np.trapezoid(vals, grid)
        return cls(grid=grid, values=vals)

    @classmethod
    def from_profile(cls, prof: WaveProfile, grid=None, center: float = None) -> "DensityField":
        grid = prof.grid if grid is None else np.asarray(grid, dtype=float)
        shift = 0.0 if center is None else center
        return cls(grid=grid, values=prof.density_at(grid, shift=shift))


@lru_cache(maxsize=None)
def _exp_kernel(h: float):
    """Node weights of the mass/mean-preserving projection of the Exp(1) jump law.

    Cell d (offsets [dh, (d+1)h]) has mass m_d = (1-r) r^d with r = e^{-h}; the
    split fraction theta places each cell's mass on its two nodes preserving the
    within-cell mean, and is the same for every cell. The node weights are
    W_0 = (1-theta)(1-r) and W_d = c1 r^{d-1} for d >= 1; c1 is derived from W_0
    so the total is exactly 1 in floating point.
    """
    r = math.exp(-h)
    theta = (1.0 - (1.0 + h) * r) / (h * (1.0 - r))
    w0 = (1.0 - theta) * (1.0 - r)
    c1 = (1.0 - w0) * (1.0 - r)
    return r, w0, c1


def _jump_flux(s: np.ndarray, h: float) -> np.ndarray:
    """conv_j = sum_d W_d s_{j-d} via the geometric recursion (O(grid))."""
    r, w0, c1 = _exp_kernel(h)
    shifted = np.empty_like(s)
    shifted[0] = 0.0
    shifted[1:] = s[:-1]
    tail = lfilter([1.0], [1.0, -r], shifted)
    return w0 * s + c1 * tail


def _stability_limit(w, grid, m: float) -> float:
    # w is non-increasing, so its sup over the grid sits at the left edge.
    return float(w.rate(grid[0] - m))


def pde_step(field: DensityField, w, dt: float) -> DensityField:
    """One explicit Euler step of the mean-field equation with Exp(1) jumps."""
    wmax = _stability_limit(w, field.grid, field.mean)
    if dt > 0.5 / wmax:
        raise StepSizeError(
            f"dt={dt} exceeds the stability budget 0.5/sup w = {0.5 / wmax:.3g}; "
            "shrink dt or trim the left edge of the grid")
    m = field.mean
    s = np.asarray(w.rate(field.grid - m), dtype=float) * field.values
    new_values = field.values + dt * (_jump_flux(s, field.h) - s)
    return DensityField(grid=field.grid, values=new_values, time=field.time + dt)


def pde_step_general(field: DensityField, w, kernel_weights: np.ndarray, dt: float) -> DensityField:
    """Euler step with an arbitrary jump-kernel weight vector (O(grid^2) convolution).

    Not acceptance-tested; provided for non-exponential jump laws. Build the
    weights with `jump_kernel_weights`.
    """
    wmax = _stability_limit(w, field.grid, field.mean)
    if dt > 0.5 / wmax:
        raise StepSizeError(f"dt={dt} exceeds the stability budget {0.5 / wmax:.3g}")
    m = field.mean
    s = np.asarray(w.rate(field.grid - m), dtype=float) * field.values
    conv = np.convolve(s, kernel_weights)[: len(s)]
    new_values = field.values + dt * (conv - s)
    return DensityField(grid=field.grid, values=new_values, time=field.time + dt)


def jump_kernel_weights(phi, h: float, tail_tol: float = 1e-14, max_cells: int = 100_000):
    """Mass/mean-preserving node weights for a general jump density phi on [0, inf)."""
    weights = [0.0]
    d = 0
    total = 0.0
    while d < max_cells:
        lo, hi = d * h, (d + 1) * h
        mass, _ = quad(phi, lo, hi, limit=100)
        if mass > 0:
            m1, _ = quad(lambda u: u * phi(u), lo, hi, limit=100)
            theta = (m1 / mass - lo) / h
            weights[d] += (1.0 - theta) * mass
            weights.append(theta * mass)
        else:
            weights.append(0.0)
        total += mass
        if 1.0 - total < tail_tol and d > 2:
            break
        d += 1
    return np.asarray(weights)


@dataclass
class PdeDiagnostics:
    t: np.ndarray
    mass: np.ndarray
    mean: np.ndarray
    speed: np.ndarray
    w1_shape: np.ndarray = None      # W1 to the wave recentered at the field mean
    w1_moving: np.ndarray = None     # W1 to the wave translated at speed c from t=0
    trimmed_mass: float = 0.0

    def mass_drift_per_unit_time(self) -> float:
        span = self.t[-1] - self.t[0]
        return abs(self.mass[-1] - self.mass[0]) / max(span, 1e-300)


def _w1_grid_vs_callable(grid, values, pdf) -> float:
    target = np.asarray(pdf(grid), dtype=float)
    h = grid[1] - grid[0]
    f1 = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * h)])
    f2 = np.concatenate([[0.0], np.cumsum(0.5 * (target[1:] + target[:-1]) * h)])
    return float(np.trapezoid(np.abs(f1 - f2), grid))


def pde_integrate(field: DensityField, w, T: float, dt: float,
                  samples: int = 200, wave: WaveProfile = None,
                  track_window: bool = True) -> tuple:
    """Integrate the mean-field equation to horizon T.

    Returns (final DensityField, PdeDiagnostics). The active window follows the
    wave when `track_window`: left cells are dropped only once their density is
    below 1e-30 (the trimmed total is reported), and zero cells are appended on
    the right, keeping the explicit-Euler stability budget satisfiable as the
    mean advances. Mass drift is reported in the diagnostics, never silently
    corrected.
    """
    grid = field.grid.copy()
    values = field.values.copy()
    h = field.h
    t = field.time
    n_steps = int(round(T / dt))
    sample_every = max(1, n_steps // max(samples, 1))
    m0 = field.mean
    t0 = t

    times, masses, means, speeds = [], [], [], []
    w1s, w1m = [], []
    trimmed = 0.0

    def record(m, mass, spd):
        times.append(t)
        masses.append(mass)
        means.append(m)
        speeds.append(spd)
        if wave is not None:
            w1s.append(_w1_grid_vs_callable(grid, values, lambda x: wave.density_at(x, shift=m)))
            w1m.append(_w1_grid_vs_callable(
                grid, values, lambda x: wave.density_at(x, shift=m0 + wave.c * (t - t0))))

    mass = float(np.trapezoid(values, grid))
    m = float(np.trapezoid(grid * values, grid) / mass)
    offset0 = m - grid[0]            # window geometry preserved as the wave moves
    record(m, mass, mean_speed_arrays(grid, values, m, w))

    for step in range(1, n_steps + 1):
        wmax = float(w.rate(grid[0] - m))
        if dt > 0.5 / wmax:
            raise StepSizeError(
                f"dt={dt} exceeds the stability budget {0.5 / wmax:.3g} at t={t:.4g}; "
                "widen the window or enable track_window")
        s = np.asarray(w.rate(grid - m), dtype=float) * values
        values = values + dt * (_jump_flux(s, h) - s)
        t += dt
        mass = float(np.trapezoid(values, grid))
        m = float(np.trapezoid(grid * values, grid) / mass)

        if track_window:
            shift_cells = int((m - grid[0] - offset0) / h)
            if shift_cells >= 1:
                k = shift_cells
                dropped = values[:k]
                if np.any(np.abs(dropped) > 1e-30):
                    # Never drop cells that still carry mass; widen instead
                    # (the stability check will fail loudly if dt is too big
                    # for the resulting window).
                    grid = np.concatenate([grid, grid[-1] + h * np.arange(1, k + 1)])
                    values = np.concatenate([values, np.zeros(k)])
                else:
                    trimmed += float(dropped.sum())
                    grid = grid + k * h
                    values = np.concatenate([values[k:], np.zeros(k)])

        if step % sample_every == 0 or step == n_steps:
            record(m, mass, mean_speed_arrays(grid, values, m, w))

    diags = PdeDiagnostics(
        t=np.asarray(times), mass=np.asarray(masses), mean=np.asarray(means),
        speed=np.asarray(speeds),
        w1_shape=np.asarray(w1s) if wave is not None else None,
        w1_moving=np.asarray(w1m) if wave is not None else None,
        trimmed_mass=trimmed)
    return DensityField(grid=grid, values=values, time=t), diags
