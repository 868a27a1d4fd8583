import math

import numpy as np
import pytest

import flockjump as fj
from flockjump.model import DomainError, ModelError

GAMMA = 0.5772156649015329

ALL_RATES = [
    fj.ExponentialRate(1.0),
    fj.ExponentialRate(2.5),
    fj.StepRate(2.0, 1.0),
    fj.PiecewiseLinearRate(2.0, 1.0),
    fj.ArccotRate(),
    fj.TabulatedRate(grid=(-2.0, -1.0, 0.0, 1.0, 2.0), values=(2.0, 1.8, 1.5, 1.2, 1.0)),
]


def test_rate_eval_examples():
    assert fj.rate_eval(fj.ExponentialRate(1.0), 0.0) == 1.0
    assert fj.rate_eval(fj.StepRate(2.0, 1.0), -0.5) == 2.0
    assert fj.rate_eval(fj.StepRate(2.0, 1.0), 0.0) == 1.0
    assert fj.rate_eval(fj.ArccotRate(), 0.0) == pytest.approx(math.pi / 2, abs=1e-15)
    assert fj.rate_eval(fj.PiecewiseLinearRate(2.0, 1.0), 0.0) == pytest.approx(1.5)


def test_rate_eval_rejects_nonfinite():
    with pytest.raises(DomainError):
        fj.rate_eval(fj.ExponentialRate(1.0), math.nan)
    with pytest.raises(DomainError):
        fj.rate_eval(fj.StepRate(2.0, 1.0), math.inf)


@pytest.mark.parametrize("w", ALL_RATES, ids=lambda w: type(w).__name__)
def test_rates_positive_and_non_increasing_on_probe_grid(w):
    xs = np.linspace(-30.0, 30.0, 4001)
    vals = w.rate(xs)
    assert np.all(vals > 0)
    assert np.all(np.diff(vals) <= 1e-15)


def test_tabulated_bounded_by_declared_sup():
    w = fj.TabulatedRate(grid=(-1.0, 1.0), values=(3.0, 1.0))
    xs = np.linspace(-50, 50, 999)
    assert np.all(w.rate(xs) <= 3.0)
    assert w.rate(-10.0) == 3.0 and w.rate(10.0) == 1.0  # flat extension


def test_tabulated_validation():
    with pytest.raises(ModelError):
        fj.TabulatedRate(grid=(0.0, 1.0), values=(1.0, 2.0))       # increasing
    with pytest.raises(ModelError):
        fj.TabulatedRate(grid=(1.0, 0.0), values=(2.0, 1.0))       # grid not ascending
    with pytest.raises(ModelError):
        fj.TabulatedRate(grid=(0.0, 1.0), values=(2.0, 1.0), left_limit=5.0)


def test_rate_parameter_validation():
    with pytest.raises(ModelError):
        fj.StepRate(1.0, 2.0)
    with pytest.raises(ModelError):
        fj.ExponentialRate(-1.0)
    with pytest.raises(ModelError):
        fj.PiecewiseLinearRate(1.0, 1.0)


@pytest.mark.parametrize("w", ALL_RATES, ids=lambda w: type(w).__name__)
def test_rate_integral_matches_quadrature(w):
    from scipy.integrate import quad

    for x in (-3.7, -1.0, -0.2, 0.0, 0.6, 1.0, 2.9, 8.0):
        lo, hi = min(0.0, x), max(0.0, x)
        pts = [k for k in w.knots if lo < k < hi] or None
        ref, _ = quad(lambda s: float(w.rate(s)), lo, hi, points=pts, limit=200)
        if x < 0:
            ref = -ref
        assert fj.rate_integral(w, x) == pytest.approx(ref, abs=1e-9)


def test_exponential_clamp_no_overflow():
    w = fj.ExponentialRate(1.0)
    assert math.isfinite(float(w.rate(-1e6)))
    assert float(w.rate(1e6)) > 0


def test_deterministic_jump():
    z = fj.DeterministicJump()
    rng = np.random.default_rng(0)
    draws = z.sample(rng, 1000)
    assert np.all(draws == 1.0)
    assert fj.sample_jump(z, rng) == 1.0


def test_exponential_jump_moments():
    z = fj.ExponentialJump()
    rng = np.random.default_rng(1)
    draws = z.sample(rng, 1_000_000)
    assert np.all(draws >= 0)
    assert draws.mean() == pytest.approx(1.0, abs=0.01)
    # Monte Carlo oracle: EZ^3 = 3! for the mean-one exponential
    assert np.mean(draws ** 3) == pytest.approx(6.0, abs=0.3)


def test_expect_shifted_closed_forms():
    zd = fj.DeterministicJump()
    ze = fj.ExponentialJump()
    f = lambda x: np.tanh(x)
    assert zd.expect_shifted(f, 0.5) == pytest.approx(math.tanh(1.5))
    # E tanh(x + Z) against quadrature for the exponential law
    from scipy.integrate import quad

    ref, _ = quad(lambda u: math.tanh(0.5 + u) * math.exp(-u), 0, 60, limit=200)
    assert float(ze.expect_shifted(f, 0.5)) == pytest.approx(ref, abs=1e-10)
    # identity: E (x + Z) - x = EZ = 1
    ident = lambda x: np.asarray(x, dtype=float)
    assert float(ze.expect_shifted(ident, 2.0)) == pytest.approx(3.0, abs=1e-8)


def test_custom_density_jump_validation():
    # density with mean 2 must be rejected (EZ = 1 normalization)
    bad = lambda u: 0.25 * u * np.exp(-u / 2.0) if np.isscalar(u) else 0.25 * u * np.exp(-u / 2.0)
    with pytest.raises(ModelError):
        fj.CustomDensityJump(density=bad, sampler=lambda rng, size: rng.gamma(2.0, 0.5, size),
                             third_moment=3.75)
    # valid: Gamma(2, 1/2) has mean 1, third moment 24/8 = 3
    dens = lambda u: 4.0 * u * np.exp(-2.0 * u)
    z = fj.CustomDensityJump(density=dens, sampler=lambda rng, size: rng.gamma(2.0, 0.5, size),
                             third_moment=3.0)
    rng = np.random.default_rng(2)
    draws = z.sample(rng, 200_000)
    assert draws.mean() == pytest.approx(1.0, abs=0.01)
    # negative sampler output is a model error
    zbad = fj.CustomDensityJump(density=dens, sampler=lambda rng, size: -np.ones(size),
                                third_moment=3.0)
    with pytest.raises(ModelError):
        zbad.sample(rng, 4)


def test_center_of_mass():
    st = fj.SystemState(positions=np.array([1.0, 2.0, 3.0]))
    assert fj.center_of_mass(st) == pytest.approx(2.0)
    st1 = fj.SystemState(positions=np.array([4.2]))
    assert fj.center_of_mass(st1) == 4.2
    with pytest.raises(DomainError):
        fj.SystemState(positions=np.array([]))


def test_center_moves_by_jump_over_n():
    st = fj.SystemState(positions=np.zeros(8))
    before = st.center
    st.apply_jump(3, 2.5)
    assert st.center - before == pytest.approx(2.5 / 8, abs=1e-15)


def test_cached_sum_survives_many_increments():
    rng = np.random.default_rng(3)
    st = fj.SystemState(positions=rng.normal(0, 1, 10))
    for _ in range(1_000_000):
        st.pos_sum += 0.0  # simulate pure drift pressure on the cache
    st2 = fj.SystemState(positions=rng.normal(0, 1, 10))
    lengths = rng.standard_exponential(1_000_000)
    for k in range(1_000_000):
        st2.apply_jump(k % 10, lengths[k])
    exact = float(st2.positions.sum())
    assert abs(st2.pos_sum - exact) / abs(exact) < 1e-9


def test_time_monotonicity_enforced():
    st = fj.SystemState(positions=np.zeros(2))
    st.apply_jump(0, 1.0, new_time=1.0)
    with pytest.raises(ModelError):
        st.apply_jump(1, 1.0, new_time=0.5)
    with pytest.raises(ModelError):
        st.apply_jump(1, -1.0)


def test_initial_state_variants():
    assert np.all(fj.initial_state(5, "zeros").positions == 0)
    st = fj.initial_state(3, [1.0, 2.0, 3.0])
    assert st.center == pytest.approx(2.0)
    rng = np.random.default_rng(4)
    st2 = fj.initial_state(100, ("iid", lambda r, n: r.uniform(0, 1, n)), rng)
    assert st2.positions.shape == (100,)
    with pytest.raises(ModelError):
        fj.initial_state(3, [1.0, 2.0])
