import math

import numpy as np
import pytest

import flockjump as fj
from flockjump import measures as ms
from flockjump.model import DomainError, ModelError


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------


def test_default_bin_rule():
    assert ms.default_bins(10_000) == 200
    assert ms.default_bins(1000) == math.ceil(2 * math.sqrt(1000))


def test_histogram_basic_counting():
    pos = np.array([0.0, 0.5, 1.5, 9.99, -10.5, 10.0])
    h = ms.build_histogram(pos, 0.0, -10.0, 10.0, nbins=20)
    assert h.nbins == 20 and h.h == 1.0
    assert h.out_below == 1          # -10.5
    assert h.out_above == 1          # 10.0, bins are right-open
    # mass identity is an exact counting identity
    assert h.values.sum() * h.h + h.out_count / h.n_samples == pytest.approx(1.0, abs=1e-15)
    assert h.inside_fraction() == pytest.approx(4 / 6)


def test_histogram_all_in_one_bin():
    pos = np.full(50, 0.25)
    h = ms.build_histogram(pos, 0.0, 0.0, 1.0, nbins=2)
    assert h.values[0] == pytest.approx(1.0 / h.h)
    assert h.values[1] == 0.0


def test_histogram_left_closed_bins():
    h = ms.build_histogram(np.array([0.0, 1.0]), 0.0, 0.0, 2.0, nbins=2)
    assert h.values[0] == h.values[1]      # 1.0 lands in the second bin


def test_histogram_centering():
    pos = np.array([5.0, 6.0, 7.0])
    h = ms.build_histogram(pos, 6.0, -2.0, 2.0, nbins=4)
    assert h.out_count == 0
    assert h.cdf_at_edges()[-1] == pytest.approx(1.0)


def test_histogram_window_validation():
    with pytest.raises(DomainError):
        ms.build_histogram(np.zeros(3), 0.0, 1.0, -1.0)


def test_time_average_single_and_equal_weights():
    h1 = ms.build_histogram(np.array([0.1]), 0.0, 0.0, 1.0, nbins=2)
    h2 = ms.build_histogram(np.array([0.9]), 0.0, 0.0, 1.0, nbins=2)
    single = ms.time_average([3.0], [h1])
    assert np.array_equal(single.values, h1.values)
    avg = ms.time_average([0.0, 1.0], [h1, h2])
    assert np.allclose(avg.values, 0.5 * (h1.values + h2.values))
    # equispaced samples: interior full weight, endpoints half (time integral
    # of the piecewise-constant interpolation)
    h3 = ms.build_histogram(np.array([0.5]), 0.0, 0.0, 1.0, nbins=2)
    avg3 = ms.time_average([0.0, 1.0, 2.0], [h1, h2, h3])
    assert np.allclose(avg3.values,
                       0.25 * h1.values + 0.5 * h2.values + 0.25 * h3.values)


def test_time_average_requires_order():
    h1 = ms.build_histogram(np.array([0.1]), 0.0, 0.0, 1.0, nbins=2)
    avg = ms.TimeAverager()
    avg.add(1.0, h1)
    with pytest.raises(ModelError):
        avg.add(0.5, h1)


def test_time_average_burn_in():
    h1 = ms.build_histogram(np.array([0.1]), 0.0, 0.0, 1.0, nbins=2)
    h2 = ms.build_histogram(np.array([0.9]), 0.0, 0.0, 1.0, nbins=2)
    avg = ms.time_average([0.0, 10.0, 11.0], [h1, h2, h2], burn_in=5.0)
    assert np.array_equal(avg.values, h2.values)


# ---------------------------------------------------------------------------
# Wasserstein-1
# ---------------------------------------------------------------------------


def test_w1_examples():
    assert ms.wasserstein1([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert ms.wasserstein1([0.0], [1.0]) == 1.0
    assert ms.wasserstein1([0.0, 1.0], [0.0, 3.0]) == 1.0


def test_w1_brute_force_couplings_small():
    # check optimality of the sorted coupling against all permutations
    import itertools

    rng = np.random.default_rng(0)
    for _ in range(40):
        x = rng.normal(0, 1, 4)
        y = rng.normal(0.5, 2, 4)
        best = min(np.mean(np.abs(np.sort(x) - np.array(p)))
                   for p in itertools.permutations(y))
        assert ms.wasserstein1(x, y) == pytest.approx(best, abs=1e-12)


def test_w1_unequal_sizes():
    # d1(emp{0,1}, delta_{1/2}) = 1/2; merged-CDF path
    assert ms.wasserstein1([0.0, 1.0], [0.5]) == pytest.approx(0.5)
    rng = np.random.default_rng(1)
    x = rng.normal(0, 1, 300)
    y = rng.normal(0, 1, 600)
    # against the duplicated equal-size representation
    x2 = np.repeat(x, 2)
    assert ms.wasserstein1(x, y) == pytest.approx(ms.wasserstein1(x2, y), abs=1e-12)


def test_w1_metric_axioms_random_triples():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        x = rng.normal(0, 1, 8)
        y = rng.normal(rng.uniform(-1, 1), 1.5, 8)
        z = rng.standard_exponential(8)
        dxy = ms.wasserstein1(x, y)
        dyx = ms.wasserstein1(y, x)
        assert dxy == dyx                                  # symmetry, exact
        assert ms.wasserstein1(x, x) == 0.0
        assert dxy <= ms.wasserstein1(x, z) + ms.wasserstein1(z, y) + 1e-12


def test_w1_sorted_copy_is_zero():
    rng = np.random.default_rng(3)
    x = rng.normal(0, 1, 100)
    assert ms.wasserstein1(x, np.sort(x)) == 0.0


def test_w1_weighted_against_cdf():
    # dwell-weighted empirical law of Exp(1) against its cdf
    rng = np.random.default_rng(4)
    x = rng.standard_exponential(20_000)
    wts = np.ones_like(x)
    val = ms.wasserstein1_weighted(x, wts, lambda g: 1 - np.exp(-np.asarray(g)))
    assert val < 0.02


# ---------------------------------------------------------------------------
# KS distance
# ---------------------------------------------------------------------------


def test_ks_calibration():
    rng = np.random.default_rng(5)
    u = rng.random(100_000)
    assert ms.ks_distance(u, lambda x: np.clip(x, 0, 1)) <= 0.006


def test_ks_single_sample_at_median():
    assert ms.ks_distance([0.0], lambda x: np.full_like(np.asarray(x, dtype=float), 0.5)) == 0.5


def test_ks_all_samples_below_support():
    cdf = lambda x: np.where(np.asarray(x) < 100.0, 0.0, 1.0)
    assert ms.ks_distance(np.zeros(50), cdf) == 1.0


def test_ks_weighted_matches_unweighted():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(500)
    cdf = lambda t: 0.5 * (1 + np.vectorize(math.erf)(np.asarray(t) / math.sqrt(2)))
    a = ms.ks_distance(x, cdf)
    b = ms.ks_distance(x, cdf, weights=np.ones_like(x))
    assert a == pytest.approx(b, abs=1e-12)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


def test_default_test_function_set():
    fns = ms.default_test_functions()
    # identity + tanh(x/s) for s in {1, 3} + five Gaussian bumps
    assert len(fns) == 8
    assert fns[0].is_identity
    xs = np.linspace(-50, 50, 2001)
    for f in fns[1:]:
        vals = f(xs)
        assert np.all(np.abs(vals) <= 1.0)      # bounded by 1 in absolute value


# ---------------------------------------------------------------------------
# residual A_{t,f}
# ---------------------------------------------------------------------------


def _run(w, z, n, T, seed, engine="bounded"):
    return fj.simulate(w, z, n, T=T, seed=seed, engine=engine, log_events=True)


def test_residual_zero_at_t0():
    w, z = fj.StepRate(2.0, 1.0), fj.DeterministicJump()
    res = _run(w, z, 10, 2.0, 30)
    assert ms.residual_A(np.zeros(10), res.log, ms.IDENTITY, w, z, 0.0) == 0.0


def test_residual_constant_rate_poisson_oracle():
    # constant w == a, f = Id, deterministic jumps:
    # A = m(t) - m(0) - a t, and n (m(t) - m(0)) ~ Poisson(n a t)
    flat = fj.constant_rate(1.5)
    z = fj.DeterministicJump()
    n, T = 30, 8.0
    gains, As = [], []
    for seed in range(60):
        res = _run(flat, z, n, T, 300 + seed)
        A = ms.residual_A(np.zeros(n), res.log, ms.IDENTITY, flat, z, T)
        assert A == pytest.approx(res.final_center - 1.5 * T, abs=1e-10)
        gains.append(n * (res.final_center - res.initial_center))
        As.append(A)
    lam = n * 1.5 * T
    counts = np.asarray(gains)
    assert counts.mean() == pytest.approx(lam, abs=4 * math.sqrt(lam / 60))
    assert counts.var(ddof=1) == pytest.approx(lam, rel=0.5)
    assert abs(np.mean(As)) <= 4 * np.std(As) / math.sqrt(60)


def test_residual_identity_mean_zero_many_seeds():
    w, z = fj.StepRate(2.0, 1.0), fj.DeterministicJump()
    vals = []
    for seed in range(50):
        res = _run(w, z, 25, 5.0, 400 + seed)
        vals.append(ms.residual_A(np.zeros(25), res.log, ms.IDENTITY, w, z, 5.0))
    vals = np.asarray(vals)
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_residual_fast_path_matches_generic():
    w, z = fj.StepRate(2.0, 1.0), fj.ExponentialJump()
    for seed in range(10):
        res = _run(w, z, 30, 4.0, 500 + seed)
        fast = ms._residual_id_step(np.zeros(30), res.log, w, 4.0)
        gen = ms._residual_generic(np.zeros(30), res.log, ms.IDENTITY, w, z, 4.0)
        assert fast.value == pytest.approx(gen.value, abs=1e-12)
        assert fast.sup_abs == pytest.approx(gen.sup_abs, abs=1e-12)


def test_residual_schedule_invariance():
    # the inter-event sum never references an observation schedule: recomputing
    # from the same event log always gives the identical value
    w, z = fj.StepRate(2.0, 1.0), fj.DeterministicJump()
    res = _run(w, z, 15, 3.0, 31)
    a1 = ms.residual_A(np.zeros(15), res.log, ms.IDENTITY, w, z, 3.0)
    a2 = ms.residual_A(np.zeros(15), res.log, ms.IDENTITY, w, z, 3.0)
    assert a1 == a2
    # and evaluating at an intermediate horizon uses only the covered prefix
    a_half = ms.residual_A(np.zeros(15), res.log, ms.IDENTITY, w, z, 1.5)
    assert math.isfinite(a_half)


def test_residual_bounded_f_moment_bound():
    # for |f| <= 1: E M_n(t)^2 <= 4 a t / n
    w, z = fj.StepRate(2.0, 1.0), fj.ExponentialJump()
    f = ms.default_test_functions()[1]          # tanh(x)
    n, T = 50, 3.0
    vals = []
    for seed in range(40):
        res = _run(w, z, n, T, 600 + seed)
        vals.append(ms.residual_A(np.zeros(n), res.log, f, w, z, T))
    vals = np.asarray(vals)
    bound = 4 * 2.0 * T / n
    s2 = float(np.mean(vals ** 2))
    se = s2 * math.sqrt(2.0 / (len(vals) - 1))
    assert s2 <= bound + 3 * se


def test_residual_fast_path_nonzero_initial_positions():
    # ties and spread in the starting configuration exercise the pointer logic
    w, z = fj.StepRate(2.0, 1.0), fj.ExponentialJump()
    init = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 2.5, -3.0, 4.0, 4.0, 4.0])
    for seed in range(5):
        res = fj.simulate(w, z, 10, T=6.0, seed=800 + seed, init=init.copy(),
                          engine="bounded", log_events=True)
        fast = ms._residual_id_step(init, res.log, w, 6.0)
        gen = ms._residual_generic(init, res.log, ms.IDENTITY, w, z, 6.0)
        assert fast.value == pytest.approx(gen.value, abs=1e-12)
        assert fast.sup_abs == pytest.approx(gen.sup_abs, abs=1e-12)


def test_residual_scaling_slope(tmp_path):
    w, z = fj.StepRate(2.0, 1.0), fj.DeterministicJump()
    study = ms.residual_scaling([50, 200, 800], seeds=12, t=6.0, w=w, z=z, base_seed=700)
    assert -0.75 <= study.slope <= -0.25
    assert all(r > 0 for r in study.rms_sup)
    assert study.rms_sup[0] > study.rms_sup[-1]      # decreasing in n
    out = tmp_path / "scaling.csv"
    study.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "n,seed,sup_residual"
    assert len(lines) == 1 + 3 * 12
