"""Empirical-measure machinery: centered density histograms and their time
averages, the 1-Wasserstein and Kolmogorov-Smirnov distances, and the
test-function residual A_{t,f} whose fluctuations vanish like n^{-1/2}.

The residual integral is a finite sum over inter-event intervals (the
empirical measure is piecewise constant in time), so its value is exact given
the event log and does not depend on any observation schedule.
"""

from __future__ import annotations

import math
from bisect import bisect_left, insort
from dataclasses import dataclass

import numpy as np

from .model import DomainError, ModelError, StepRate
from . import sim as _sim


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------


def default_bins(n: int) -> int:
    """Bin-count rule N = 2 sqrt(n) (rounded up)."""
    return max(1, math.ceil(2.0 * math.sqrt(n)))


@dataclass
class Histogram:
    """Centered density histogram on [a0, a1) with left-closed bins.

    `values` carry the 1/(n h) density scaling; samples outside the window are
    counted separately (below/above), so bin mass plus the out-of-window
    fraction is an exact counting identity: counts.sum() + out = n. Counts are
    fractional after time averaging.
    """

    a0: float
    a1: float
    nbins: int
    values: np.ndarray
    n_samples: float
    out_below: float
    out_above: float
    counts: np.ndarray = None

    @property
    def h(self) -> float:
        return (self.a1 - self.a0) / self.nbins

    @property
    def edges(self) -> np.ndarray:
        return self.a0 + self.h * np.arange(self.nbins + 1)

    @property
    def out_count(self) -> float:
        return self.out_below + self.out_above

    def inside_fraction(self) -> float:
        return 1.0 - self.out_count / self.n_samples

    def bin_mass(self) -> np.ndarray:
        return self.values * self.h

    def cdf_at_edges(self) -> np.ndarray:
        """Empirical CDF of the full sample evaluated at the bin edges."""
        inside = np.concatenate([[0.0], np.cumsum(self.bin_mass())])
        return self.out_below / self.n_samples + inside

    def write_csv(self, path):
        edges = self.edges
        with open(path, "w") as fh:
            fh.write("bin_left,bin_right,density\n")
            for j in range(self.nbins):
                fh.write(f"{edges[j]:.17g},{edges[j + 1]:.17g},{self.values[j]:.17g}\n")


def build_histogram(positions, m: float, a0: float, a1: float, nbins: int = None) -> Histogram:
    """Bin the centered positions x_i - m into [a0, a1); default nbins = 2 sqrt(n)."""
    if not a0 < a1:
        raise DomainError("histogram window needs a0 < a1")
    positions = np.asarray(positions, dtype=float)
    n = positions.size
    if nbins is None:
        nbins = default_bins(n)
    if nbins < 1:
        raise DomainError("nbins must be >= 1")
    centered = positions - m
    h = (a1 - a0) / nbins
    inside = (centered >= a0) & (centered < a1)
    below = int(np.count_nonzero(centered < a0))
    above = int(np.count_nonzero(centered >= a1))
    idx = np.floor((centered[inside] - a0) / h).astype(np.int64)
    np.clip(idx, 0, nbins - 1, out=idx)
    counts = np.bincount(idx, minlength=nbins).astype(float)
    return Histogram(a0=a0, a1=a1, nbins=nbins, values=counts / (n * h),
                     n_samples=float(n), out_below=float(below), out_above=float(above),
                     counts=counts)


class TimeAverager:
    """Time average of a histogram stream.

    Each sample represents the piecewise-constant state on the neighborhood up
    to the midpoints of the adjacent sample times, so equispaced samples get
    equal weight (two samples average to their bin-wise mean). A burn-in prefix
    can be discarded.
    """

    def __init__(self, burn_in: float = 0.0):
        self.burn_in = burn_in
        self._times = []
        self._hists = []

    def add(self, t: float, hist: Histogram):
        if self._times and t < self._times[-1]:
            raise ModelError("histogram samples must arrive in time order")
        if t >= self.burn_in:
            self._times.append(t)
            self._hists.append(hist)

    def finalize(self) -> Histogram:
        if not self._hists:
            raise ModelError("no histogram samples to average")
        if len(self._hists) == 1:
            return self._hists[0]
        t = np.asarray(self._times)
        weights = np.empty_like(t)
        weights[0] = 0.5 * (t[1] - t[0])
        weights[-1] = 0.5 * (t[-1] - t[-2])
        weights[1:-1] = 0.5 * (t[2:] - t[:-2])
        total = weights.sum()
        first = self._hists[0]
        values = np.zeros_like(first.values)
        counts = np.zeros_like(first.values)
        below = above = nsamp = 0.0
        for wgt, hh in zip(weights, self._hists):
            values += wgt * hh.values
            if hh.counts is not None:
                counts += wgt * hh.counts
            below += wgt * hh.out_below
            above += wgt * hh.out_above
            nsamp += wgt * hh.n_samples
        return Histogram(a0=first.a0, a1=first.a1, nbins=first.nbins,
                         values=values / total, n_samples=nsamp / total,
                         out_below=below / total, out_above=above / total,
                         counts=counts / total)


def time_average(times, hists, burn_in: float = 0.0) -> Histogram:
    avg = TimeAverager(burn_in=burn_in)
    for t, hh in zip(times, hists):
        avg.add(t, hh)
    return avg.finalize()


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def wasserstein1(mu, nu) -> float:
    """1-Wasserstein distance between two empirical samples on the line.

    Equal sizes reduce to the mean absolute difference of the sorted samples
    (the quantile coupling is optimal on the line); unequal sizes integrate the
    CDF difference over the merged support.
    """
    x = np.sort(np.asarray(mu, dtype=float))
    y = np.sort(np.asarray(nu, dtype=float))
    if x.size == 0 or y.size == 0:
        raise DomainError("empirical measures need at least one sample")
    if x.size == y.size:
        return float(np.mean(np.abs(x - y)))
    allv = np.sort(np.concatenate([x, y]))
    fx = np.searchsorted(x, allv[:-1], side="right") / x.size
    fy = np.searchsorted(y, allv[:-1], side="right") / y.size
    return float(np.sum(np.abs(fx - fy) * np.diff(allv)))


def wasserstein1_weighted(values, weights, cdf) -> float:
    """W1 between a weighted empirical law (e.g. dwell-time-weighted gap levels)
    and an absolutely continuous law given by its CDF, via |F1 - F2| integral."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values)
    v = values[order]
    wts = np.asarray(weights, dtype=float)[order]
    cum = np.cumsum(wts) / wts.sum()
    mids = 0.5 * (v[1:] + v[:-1])
    # Piecewise: between consecutive support points the empirical CDF is constant.
    segs = np.abs(cum[:-1] - np.asarray(cdf(mids))) * np.diff(v)
    return float(np.sum(segs))


def w1_from_cdfs(xs, f1, f2) -> float:
    """Trapezoid integral of |F1 - F2| on a common grid."""
    xs = np.asarray(xs, dtype=float)
    return float(np.trapezoid(np.abs(np.asarray(f1) - np.asarray(f2)), xs))


def ks_distance(samples, cdf, weights=None) -> float:
    """Two-sided Kolmogorov-Smirnov statistic of samples against a model CDF.

    With `weights`, the empirical CDF steps by the normalized weights
    (time-weighted stationary sampling)."""
    samples = np.asarray(samples, dtype=float)
    order = np.argsort(samples)
    s = samples[order]
    if weights is None:
        cum = np.arange(1, s.size + 1) / s.size
        prev = np.arange(0, s.size) / s.size
    else:
        wts = np.asarray(weights, dtype=float)[order]
        cum = np.cumsum(wts) / wts.sum()
        prev = cum - wts / wts.sum()
    model = np.asarray(cdf(s), dtype=float)
    return float(max(np.max(np.abs(cum - model)), np.max(np.abs(prev - model))))


# ---------------------------------------------------------------------------
# test functions and the martingale residual A_{t,f}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: object = None           # None marks the identity
    is_identity: bool = False

    def __call__(self, x):
        if self.is_identity:
            return np.asarray(x, dtype=float)
        return self.fn(x)


IDENTITY = TestFunction(name="id", is_identity=True)


def default_test_functions():
    """Identity plus bounded continuous probes: tanh ramps and Gaussian bumps."""
    fns = [IDENTITY]
    for s in (1.0, 3.0):
        fns.append(TestFunction(name=f"tanh_s{s:g}",
                                fn=(lambda s: lambda x: np.tanh(np.asarray(x) / s))(s)))
    for c in (-4.0, -2.0, 0.0, 2.0, 4.0):
        fns.append(TestFunction(name=f"bump_c{c:g}",
                                fn=(lambda c: lambda x: np.exp(-0.5 * (np.asarray(x) - c) ** 2))(c)))
    return fns


@dataclass
class ResidualPath:
    value: float      # A_{t,f} at the requested horizon
    sup_abs: float    # sup over s <= t of |A_{s,f}|
    t: float


def _g_of(f: TestFunction, z):
    """g_f(x) = E f(x+Z) - f(x); identically 1 for the identity (EZ = 1)."""
    if f.is_identity:
        return None
    return lambda x: np.asarray(z.expect_shifted(f, x), dtype=float) - np.asarray(f(x), dtype=float)


def residual_path(initial_positions, log: _sim.EventLog, f: TestFunction,
                  w, z, t_end: float) -> ResidualPath:
    """A_{s,f} along the trajectory, summed exactly over inter-event intervals.

    The bracket <g_f(x) w(x - m)> is piecewise constant between events, so the
    time integral is a finite sum. Dispatches to an incremental update for the
    identity function with step rates (the large-n scaling study); the generic
    path re-evaluates the bracket after each event.
    """
    if len(log) and log.times[0] < 0:
        raise DomainError("event log must start at time >= 0")
    if f.is_identity and isinstance(w, StepRate):
        return _residual_id_step(initial_positions, log, w, t_end)
    return _residual_generic(initial_positions, log, f, w, z, t_end)


def _residual_generic(initial_positions, log, f, w, z, t_end):
    pos = np.asarray(initial_positions, dtype=float).copy()
    n = pos.size
    m = float(pos.mean())
    g = _g_of(f, z)

    def bracket():
        wv = np.asarray(w.rate(pos - m), dtype=float)
        if g is None:
            return float(wv.mean())
        return float(np.mean(g(pos) * wv))

    def f_mean():
        return m if f.is_identity else float(np.mean(f(pos)))

    F0 = f_mean()
    G = bracket()
    integral = 0.0
    t_prev = 0.0
    F = F0
    sup = 0.0
    for k in range(len(log)):
        te = float(log.times[k])
        if te > t_end:
            break
        integral += G * (te - t_prev)
        t_prev = te
        sup = max(sup, abs(F - F0 - integral))       # value just before the jump
        i = int(log.indices[k])
        zlen = float(log.lengths[k])
        if not f.is_identity:
            F += (float(f(pos[i] + zlen)) - float(f(pos[i]))) / n
        pos[i] += zlen
        m += zlen / n
        if f.is_identity:
            F = m
        G = bracket()
        sup = max(sup, abs(F - F0 - integral))       # value just after the jump
    integral += G * (t_end - t_prev)
    value = F - F0 - integral
    sup = max(sup, abs(value))
    return ResidualPath(value=value, sup_abs=sup, t=t_end)


def _residual_id_step(initial_positions, log, w, t_end):
    """Incremental bracket for f = Id with a step rate: <w> = (a p + b (n-p))/n,
    where p counts particles strictly behind the center of mass."""
    a, b = w.a, w.b
    pos0 = [float(x) for x in initial_positions]
    n = len(pos0)
    srt = sorted(pos0)
    positions = list(pos0)
    m = math.fsum(pos0) / n
    p = bisect_left(srt, m)
    # entries equal to m are "ahead" (w(0) = b); bisect_left counts strictly-less
    while p < n and srt[p] < m:
        p += 1
    G = (a * p + b * (n - p)) / n
    F0 = m
    integral = 0.0
    t_prev = 0.0
    sup = 0.0
    inv_n = 1.0 / n
    times, indices, lengths = log.times, log.indices, log.lengths
    for k in range(len(times)):
        te = times[k]
        if te > t_end:
            break
        integral += G * (te - t_prev)
        t_prev = te
        sup = max(sup, abs(m - F0 - integral))
        i = int(indices[k])
        zlen = lengths[k]
        x_old = positions[i]
        j = bisect_left(srt, x_old)
        del srt[j]
        if j < p:
            p -= 1
        m_new = m + zlen * inv_n
        while p < n - 1 and srt[p] < m_new:
            p += 1
        x_new = x_old + zlen
        positions[i] = x_new
        insort(srt, x_new)
        if x_new < m_new:
            p += 1
        m = m_new
        G = (a * p + b * (n - p)) * inv_n
        sup = max(sup, abs(m - F0 - integral))
    integral += G * (t_end - t_prev)
    value = m - F0 - integral
    sup = max(sup, abs(value))
    return ResidualPath(value=value, sup_abs=sup, t=t_end)


def residual_A(initial_positions, log: _sim.EventLog, f: TestFunction, w, z, t: float) -> float:
    """A_{t,f}: <f, mu(t)> - <f, mu(0)> - int_0^t <g_f w(. - m_s), mu(s)> ds."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0.0:
        return 0.0
    return residual_path(initial_positions, log, f, w, z, t).value


@dataclass
class ScalingStudy:
    ns: list
    rms_sup: list
    values: dict            # n -> array of A_{t,f} end values across seeds
    sups: dict              # n -> array of sup_s |A_{s,f}|
    slope: float
    intercept: float

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,seed,sup_residual\n")
            for n in self.ns:
                for seed, sup in enumerate(self.sups[n]):
                    fh.write(f"{n},{seed},{sup:.17g}\n")


def residual_scaling(ns, seeds: int, t: float, w, z, f: TestFunction = IDENTITY,
                     base_seed: int = 0, init="zeros") -> ScalingStudy:
    """Fit the n-scaling of the sup residual: slope of log RMS sup|A| vs log n.

    Runs `seeds` independent trajectories per population size with the bounded
    engine and evaluates the residual path exactly; the expected slope is -1/2.
    """
    rms = []
    values = {}
    sups = {}
    for n in ns:
        init_pos = np.zeros(n) if init == "zeros" else np.asarray(init, dtype=float)
        vals = np.empty(seeds)
        sup = np.empty(seeds)
        for s in range(seeds):
            rng = np.random.default_rng(base_seed + 1000 * n + s)
            res = _sim.simulate(w, z, n, T=t, rng=rng, init=init_pos if init != "zeros" else "zeros",
                                engine="bounded", log_events=True)
            path = residual_path(init_pos, res.log, f, w, z, t)
            vals[s] = path.value
            sup[s] = path.sup_abs
        values[n] = vals
        sups[n] = sup
        rms.append(float(np.sqrt(np.mean(sup ** 2))))
    lx = np.log(np.asarray(ns, dtype=float))
    ly = np.log(np.asarray(rms))
    slope, intercept = np.polyfit(lx, ly, 1)
    return ScalingStudy(ns=list(ns), rms_sup=rms, values=values, sups=sups,
                        slope=float(slope), intercept=float(intercept))
