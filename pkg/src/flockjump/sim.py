"""Exact event-driven simulation of the n-particle jump process.

Three exactly-equivalent engines:

* ``reference`` -- textbook competing-exponentials: recompute every rate,
  draw the holding time from the total, select by cumulative probability.
  O(n) per event; the correctness oracle for the fast engines.
* ``bounded`` -- constant-rate thinning for bounded rate families: proposals
  arrive at rate n*a (a = sup w), the target particle is uniform, and each
  proposal is accepted with probability w(x_i - m)/a. This is the dominating
  coupling construction, so the coupled run shares it.
* ``exponential`` -- for w(x) = exp(-beta*x) the selection weights factor as
  C(m) * exp(-beta*x_i), so they are independent of m and only decrease when a
  particle jumps. Proposals drawn from a frozen weight table are thinned by
  u_now/u_frozen (exact), and the table is rebuilt when the live total falls
  below half the frozen total.

All engines keep the center of mass via m += Z/n (the per-event identity is
exact) and re-synchronize it from the positions every RESUM_INTERVAL events.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .model import (
    DeterministicJump,
    ExponentialRate,
    ModelError,
    RESUM_INTERVAL,
    StepRate,
    PiecewiseLinearRate,
    ArccotRate,
    TabulatedRate,
    SystemState,
    initial_state,
)

_BATCH = 1 << 14


class StallError(ModelError):
    """Total jump rate underflowed to zero; the clock cannot advance."""


class UnsupportedSpecError(ModelError):
    """The requested engine cannot run this rate family."""


@dataclass(frozen=True)
class EventRecord:
    time: float
    particle_index: int
    jump_length: float
    new_center: float


@dataclass
class EventLog:
    """Columnar event log (one entry per accepted jump)."""

    times: np.ndarray
    indices: np.ndarray
    lengths: np.ndarray
    centers: np.ndarray

    def __len__(self):
        return len(self.times)

    def record(self, k: int) -> EventRecord:
        return EventRecord(float(self.times[k]), int(self.indices[k]),
                           float(self.lengths[k]), float(self.centers[k]))

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("time,particle_index,jump_length,center_of_mass\n")
            for t, i, z, c in zip(self.times, self.indices, self.lengths, self.centers):
                fh.write(f"{t:.17g},{int(i)},{z:.17g},{c:.17g}\n")


@dataclass
class SimulationResult:
    n: int
    engine: str
    events: int
    final_time: float
    initial_center: float
    final_center: float
    truncated: bool
    state: SystemState
    proposals: int = 0
    log: EventLog = None


def total_rate(state: SystemState, w) -> float:
    """Sum of w(x_i - m) over the configuration; finite and positive."""
    rates = np.asarray(w.rate(state.positions - state.center), dtype=float)
    R = float(rates.sum())
    if not math.isfinite(R):
        raise ArithmeticError("total jump rate is not finite")
    if R <= 0.0:
        raise StallError("total jump rate underflowed to zero")
    return R


def step(state: SystemState, w, z, rng) -> EventRecord:
    """One exact event on `state`: exponential holding time at the total rate,
    selection proportional to the per-particle rates, one forward jump."""
    rel = state.positions - state.center
    rates = np.asarray(w.rate(rel), dtype=float)
    R = float(rates.sum())
    if not math.isfinite(R):
        raise ArithmeticError("total jump rate is not finite")
    if R <= 0.0:
        raise StallError("total jump rate underflowed to zero")
    dt = rng.standard_exponential() / R
    # Cumulative-probability selection; boundary ties resolve to the lower index.
    u = rng.random() * R
    i = int(min(np.searchsorted(np.cumsum(rates), u, side="left"), state.n - 1))
    length = float(z.sample(rng))
    state.apply_jump(i, length, new_time=state.time + dt)
    return EventRecord(time=state.time, particle_index=i, jump_length=length,
                       new_center=state.center)


# ---------------------------------------------------------------------------
# shared scaffolding
# ---------------------------------------------------------------------------


class _Observer:
    """Emits the right-continuous state at scheduled times."""

    def __init__(self, times, callback):
        self.times = list(times) if times is not None else []
        self.callback = callback
        self.pos = 0

    def pending(self):
        return self.callback is not None and self.pos < len(self.times)

    def next_time(self):
        return self.times[self.pos] if self.pending() else math.inf

    def emit_before(self, t_event, positions, m):
        # Observation times strictly before the next event see the current state.
        while self.pending() and self.times[self.pos] < t_event:
            self.callback(self.times[self.pos], positions(), m)
            self.pos += 1

    def emit_at(self, t_event, positions, m):
        # A tie with an event time sees the post-event (right-continuous) state.
        while self.pending() and self.times[self.pos] == t_event:
            self.callback(self.times[self.pos], positions(), m)
            self.pos += 1

    def emit_through(self, t_final, positions, m):
        while self.pending() and self.times[self.pos] <= t_final:
            self.callback(self.times[self.pos], positions(), m)
            self.pos += 1


def _scalar_rate(w):
    """Pure-Python scalar rate evaluation for the hot thinning loop."""
    if isinstance(w, StepRate):
        a, b = w.a, w.b
        return lambda d: a if d < 0.0 else b
    if isinstance(w, PiecewiseLinearRate):
        a, b = w.a, w.b
        slope, mid = 0.5 * (a - b), 0.5 * (a + b)

        def rate(d):
            if d < -1.0:
                return a
            if d > 1.0:
                return b
            return mid - slope * d

        return rate
    if isinstance(w, ArccotRate):
        half_pi, atan = 0.5 * math.pi, math.atan
        return lambda d: half_pi - atan(d)
    if isinstance(w, ExponentialRate):
        beta, exp = w.beta, math.exp
        return lambda d: exp(-beta * d) if beta * d > -700.0 else math.exp(700.0)
    if isinstance(w, TabulatedRate):
        g, v = list(w.grid), list(w.values)

        def rate(d):
            if d <= g[0]:
                return v[0]
            if d >= g[-1]:
                return v[-1]
            j = bisect_left(g, d)
            gl, gr = g[j - 1], g[j]
            return v[j - 1] + (v[j] - v[j - 1]) * (d - gl) / (gr - gl)

        return rate
    return lambda d: float(w.rate(d))


def _resolve_engine(engine, w):
    if engine == "auto":
        if isinstance(w, ExponentialRate):
            return "exponential"
        if w.bounded and math.isfinite(w.left_limit):
            return "bounded"
        return "reference"
    return engine


def simulate(w, z, n: int, *, T: float = None, max_events: int = None,
             rng=None, seed: int = None, init="zeros", observer=None,
             observe_times=None, observations: int = 1000,
             engine: str = "auto", log_events: bool = False) -> SimulationResult:
    """Run the n-particle process to horizon T and/or an event cap.

    `observer(t, positions, m)` is invoked on a fixed time grid (default 1000
    equispaced samples on [0, T]) with the right-continuous state. Hitting the
    event cap before T sets `truncated` in the summary rather than failing.
    """
    if T is None and max_events is None:
        raise ModelError("need a horizon T or an event cap")
    if T is not None and T < 0:
        raise ModelError("T must be >= 0")
    if rng is None:
        rng = np.random.default_rng(seed)
    state0 = initial_state(n, init, rng)
    if observer is not None and observe_times is None:
        if T is None:
            raise ModelError("observer on a default grid needs a horizon T")
        observe_times = np.linspace(0.0, T, max(observations, 1))
    if observe_times is not None:
        observe_times = np.unique(np.asarray(observe_times, dtype=float))
    engine = _resolve_engine(engine, w)
    if engine == "bounded" and not (w.bounded and math.isfinite(w.left_limit)):
        raise UnsupportedSpecError("thinning engine needs a bounded rate function")
    if engine == "exponential" and not isinstance(w, ExponentialRate):
        raise UnsupportedSpecError("exponential engine only runs the exponential family")
    runner = {"reference": _run_reference, "bounded": _run_bounded,
              "exponential": _run_exponential}[engine]
    return runner(w, z, state0, T, max_events, rng,
                  _Observer(observe_times, observer), log_events)


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


def _finish(state, engine, events, t, c0, truncated, logs, proposals=0):
    state.time = t
    state.resum()
    log = None
    if logs is not None:
        log = EventLog(times=np.asarray(logs[0]), indices=np.asarray(logs[1], dtype=np.int64),
                       lengths=np.asarray(logs[2]), centers=np.asarray(logs[3]))
    return SimulationResult(n=state.n, engine=engine, events=events, final_time=t,
                            initial_center=c0, final_center=state.center,
                            truncated=truncated, state=state, proposals=proposals, log=log)


def _run_reference(w, z, state, T, max_events, rng, obs, log_events):
    n = state.n
    pos = state.positions
    m = state.center
    c0 = m
    t = 0.0
    events = 0
    logs = ([], [], [], []) if log_events else None
    positions_view = lambda: pos.copy()
    horizon = math.inf if T is None else T
    truncated = False
    while True:
        if max_events is not None and events >= max_events:
            truncated = T is not None and t < horizon
            break
        rates = np.asarray(w.rate(pos - m), dtype=float)
        R = float(rates.sum())
        if not math.isfinite(R):
            raise ArithmeticError("total jump rate is not finite")
        if R <= 0.0:
            raise StallError("total jump rate underflowed to zero")
        t_next = t + rng.standard_exponential() / R
        if t_next > horizon:
            t = horizon
            break
        obs.emit_before(t_next, positions_view, m)
        t = t_next
        u = rng.random() * R
        i = int(min(np.searchsorted(np.cumsum(rates), u, side="left"), n - 1))
        length = float(z.sample(rng))
        pos[i] += length
        m += length / n
        events += 1
        if events % RESUM_INTERVAL == 0:
            m = float(pos.sum()) / n
        if logs is not None:
            logs[0].append(t)
            logs[1].append(i)
            logs[2].append(length)
            logs[3].append(m)
        obs.emit_at(t, positions_view, m)
    obs.emit_through(min(horizon, t), positions_view, m)
    state.pos_sum = m * n
    return _finish(state, "reference", events, t, c0, truncated, logs)


def _run_bounded(w, z, state, T, max_events, rng, obs, log_events):
    n = state.n
    pos = state.positions.tolist()
    m = state.center
    c0 = m
    a = float(w.left_limit)
    lam = n * a
    rate = _scalar_rate(w)
    deterministic = isinstance(z, DeterministicJump)
    t = 0.0
    events = proposals = 0
    logs = ([], [], [], []) if log_events else None
    positions_view = lambda: np.asarray(pos)
    horizon = math.inf if T is None else T
    truncated = False
    inv_n = 1.0 / n

    waits = idxs = accs = zbuf = None
    cursor = _BATCH

    while True:
        if max_events is not None and events >= max_events:
            truncated = T is not None and t < horizon
            break
        if cursor >= _BATCH:
            waits = rng.standard_exponential(_BATCH)
            idxs = rng.integers(0, n, _BATCH)
            accs = rng.random(_BATCH)
            zbuf = None if deterministic else z.sample(rng, _BATCH)
            waits = waits.tolist()
            idxs = idxs.tolist()
            accs = accs.tolist()
            if zbuf is not None:
                zbuf = zbuf.tolist()
            cursor = 0
        t_next = t + waits[cursor] / lam
        if t_next > horizon:
            t = horizon
            break
        obs.emit_before(t_next, positions_view, m)
        t = t_next
        i = idxs[cursor]
        accepted = accs[cursor] * a <= rate(pos[i] - m)
        if accepted:
            length = 1.0 if deterministic else zbuf[cursor]
            pos[i] += length
            m += length * inv_n
            events += 1
            if events % RESUM_INTERVAL == 0:
                m = math.fsum(pos) * inv_n
            if logs is not None:
                logs[0].append(t)
                logs[1].append(i)
                logs[2].append(length)
                logs[3].append(m)
        proposals += 1
        cursor += 1
        if accepted:
            obs.emit_at(t, positions_view, m)
    obs.emit_through(min(horizon, t), positions_view, m)
    state.positions = np.asarray(pos)
    state.pos_sum = m * n
    return _finish(state, "bounded", events, t, c0, truncated, logs, proposals)


def _run_exponential(w, z, state, T, max_events, rng, obs, log_events):
    n = state.n
    beta = w.beta
    pos = state.positions.tolist()
    m = state.center
    c0 = m
    deterministic = isinstance(z, DeterministicJump)
    det_factor = math.exp(-beta) if deterministic else None
    t = 0.0
    events = 0
    logs = ([], [], [], []) if log_events else None
    positions_view = lambda: np.asarray(pos)
    horizon = math.inf if T is None else T
    truncated = False
    inv_n = 1.0 / n
    exp_ = math.exp

    # frozen-table state; the table is rebuilt when the live weight total falls
    # below half the frozen total (every ~n ln2/beta events), so the selection
    # batch is sized to the expected draws per rebuild cycle
    sel_batch = int(min(_BATCH, max(64, 4 * n)))
    ref = m
    u = None
    u_stale = None
    cum = None
    S = S0 = 0.0

    def rebuild():
        nonlocal ref, u, u_stale, cum, S, S0, sel, acc, sel_cursor
        ref = m
        u_np = np.exp(-beta * (np.asarray(pos) - ref))
        S0 = float(u_np.sum())
        if not (S0 > 0.0 and math.isfinite(S0)):
            raise StallError("selection weights underflowed; configuration too spread out")
        cum = np.cumsum(u_np)
        u_stale = u_np.tolist()
        u = u_stale.copy()
        S = S0
        sel = acc = None
        sel_cursor = sel_batch

    sel = acc = None
    sel_cursor = sel_batch
    waits = zbuf = None
    wait_cursor = _BATCH
    rebuild()

    while True:
        if max_events is not None and events >= max_events:
            truncated = T is not None and t < horizon
            break
        if wait_cursor >= _BATCH:
            waits = rng.standard_exponential(_BATCH).tolist()
            zbuf = None if deterministic else rng.standard_exponential(_BATCH).tolist()
            wait_cursor = 0
        R = S * exp_(beta * (m - ref))
        if not (R > 0.0 and math.isfinite(R)):
            raise StallError("total jump rate underflowed to zero")
        t_next = t + waits[wait_cursor] / R
        if t_next > horizon:
            t = horizon
            break
        obs.emit_before(t_next, positions_view, m)
        t = t_next
        wait_cursor += 1
        # selection: propose from the frozen table, thin by u_now / u_frozen
        while True:
            if sel_cursor >= sel_batch:
                picks = np.searchsorted(cum, rng.random(sel_batch) * S0, side="left")
                sel = np.minimum(picks, n - 1).tolist()
                acc = rng.random(sel_batch).tolist()
                sel_cursor = 0
            i = sel[sel_cursor]
            ok = acc[sel_cursor] * u_stale[i] <= u[i]
            sel_cursor += 1
            if ok:
                break
        length = 1.0 if deterministic else zbuf[wait_cursor - 1]
        pos[i] += length
        m += length * inv_n
        ui = u[i]
        new_u = ui * det_factor if deterministic else ui * exp_(-beta * length)
        S += new_u - ui
        u[i] = new_u
        events += 1
        if logs is not None:
            logs[0].append(t)
            logs[1].append(i)
            logs[2].append(length)
            logs[3].append(m)
        if events % RESUM_INTERVAL == 0:
            m = math.fsum(pos) * inv_n
            rebuild()
        elif S < 0.5 * S0:
            rebuild()
        obs.emit_at(t, positions_view, m)
    obs.emit_through(min(horizon, t), positions_view, m)
    state.positions = np.asarray(pos)
    state.pos_sum = m * n
    return _finish(state, "exponential", events, t, c0, truncated, logs)


# ---------------------------------------------------------------------------
# dominating coupled system
# ---------------------------------------------------------------------------


@dataclass
class CoupledResult:
    n: int
    proposals: int
    accepted: int
    final_time: float
    base_positions: np.ndarray
    dominating_positions: np.ndarray
    position_violations: int
    increment_violations: int
    times: np.ndarray
    targets: np.ndarray
    lengths: np.ndarray
    accepted_mask: np.ndarray

    @property
    def acceptance_fraction(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


def simulate_coupled(w, z, n: int, *, proposals: int = None, T: float = None,
                     rng=None, seed: int = None, init="zeros",
                     increment_windows: int = 10) -> CoupledResult:
    """Run the dominating coupled pair (x, x-tilde) from a common start.

    The dominating layer jumps at rate a per particle; the base layer accepts
    each proposal with probability w(x_i - m)/a and, when it does, jumps the
    same length. Position dominance is checked at every proposal epoch; the
    interval increment dominance is verified per particle over an
    `increment_windows`-piece partition of [0, T] using exact (fsum) sums of
    the logged jump lengths, so a zero violation count carries no tolerance.
    """
    if not (w.bounded and math.isfinite(w.left_limit)):
        raise UnsupportedSpecError(
            "the dominating coupling needs a bounded rate function (sup w = a < inf)")
    if proposals is None and T is None:
        raise ModelError("need a proposal cap or horizon T")
    if rng is None:
        rng = np.random.default_rng(seed)
    base = initial_state(n, init, rng).positions.tolist()
    dom = list(base)
    m = math.fsum(base) / n
    a = float(w.left_limit)
    lam = n * a
    rate = _scalar_rate(w)
    deterministic = isinstance(z, DeterministicJump)
    inv_n = 1.0 / n

    t = 0.0
    count = accepted = 0
    pos_violations = 0
    times, targets, lengths, accmask = [], [], [], []
    horizon = math.inf if T is None else T
    cap = math.inf if proposals is None else proposals

    while count < cap:
        t_next = t + rng.standard_exponential() / lam
        if t_next > horizon:
            t = horizon
            break
        t = t_next
        i = int(rng.integers(0, n))
        length = 1.0 if deterministic else float(z.sample(rng))
        dom[i] += length
        if rng.random() * a <= rate(base[i] - m):
            base[i] += length
            m += length * inv_n
            accepted += 1
            accmask.append(True)
        else:
            accmask.append(False)
        if dom[i] < base[i]:
            pos_violations += 1
        times.append(t)
        targets.append(i)
        lengths.append(length)
        count += 1

    times = np.asarray(times)
    targets = np.asarray(targets, dtype=np.int64)
    lengths = np.asarray(lengths)
    accmask = np.asarray(accmask, dtype=bool)

    # Interval increment dominance (exact): for each particle and each window,
    # the dominating layer's summed jumps must weakly exceed the base layer's.
    inc_violations = 0
    if len(times):
        edges = np.linspace(0.0, t, increment_windows + 1)
        window = np.clip(np.searchsorted(edges, times, side="right") - 1, 0, increment_windows - 1)
        for wi in range(increment_windows):
            in_w = window == wi
            for i in np.unique(targets[in_w]):
                sel = in_w & (targets == i)
                dom_inc = math.fsum(lengths[sel])
                base_inc = math.fsum(lengths[sel & accmask])
                if base_inc > dom_inc:
                    inc_violations += 1

    return CoupledResult(
        n=n, proposals=count, accepted=accepted, final_time=t,
        base_positions=np.asarray(base), dominating_positions=np.asarray(dom),
        position_violations=pos_violations, increment_violations=inc_violations,
        times=times, targets=targets, lengths=lengths, accepted_mask=accmask)
