"""Record-process oracle for the Gumbel family.

A pool of i.i.d. unit exponentials grows so that N(t) = ceil(e^{beta c t} /
(beta c)); with k = 1/beta a positive integer, Y(t) = k * (k-th largest pool
value) evolves like the mean-field particle with rate e^{beta(ct - y)}, and
Y(T) - (1/beta) log N(T) converges to the (uncentered) generalized Gumbel law.
Only the top k+1 pool values are retained: the jump of the k-th maximum is
exactly the gap between the new k-th and (k+1)-st largest values, so deeper
order statistics never matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import DomainError, ModelError
from .mean_field import digamma, upper_gamma_regularized, _numeric_cdf

_POOL_CAP_LOG = 62 * math.log(2.0)   # keep the pool inside 2^62
_ARRIVAL_BATCH = 1 << 16


class HorizonError(ModelError):
    """The requested time would overflow the integer pool size."""


def pool_size(beta: float, c: float, t: float) -> int:
    """N(t) = ceil(e^{beta c t} / (beta c)), at least 1."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if not (beta * c > 0):
        raise DomainError("beta * c must be positive")
    log_pool = beta * c * t - math.log(beta * c)
    if log_pool > _POOL_CAP_LOG:
        raise HorizonError(
            f"pool size exp({log_pool:.3g}) exceeds 2^62; shorten the horizon")
    v = math.exp(beta * c * t) / (beta * c)
    # ceil with a relative epsilon so exact-integer boundaries (t = log(j bc)/(bc))
    # do not round up on floating-point noise
    return max(1, math.ceil(v - 1e-9 * max(1.0, abs(v))))


def arrival_time(j: int, beta: float, c: float) -> float:
    """Time at which the pool first holds j variables (inverse of pool_size)."""
    if j <= pool_size(beta, c, 0.0):
        return 0.0
    return math.log((j - 1) * beta * c) / (beta * c)


@dataclass
class RecordPool:
    """Top-(k+1) ledger of the growing exponential pool."""

    k: int
    beta: float
    c: float
    top: list                 # descending, at most k+1 entries
    pool_count: int
    t: float = 0.0

    @property
    def y_k(self) -> float:
        if len(self.top) < self.k:
            return -math.inf
        return self.top[self.k - 1]

    @property
    def y(self) -> float:
        return self.k * self.y_k


def new_pool(beta: float, c: float, rng) -> RecordPool:
    """Start the pool at t = 0 with N(0) draws."""
    k = 1.0 / beta
    if abs(k - round(k)) > 1e-9 or k < 1:
        raise DomainError(f"the record connection needs k = 1/beta a positive integer, got 1/beta={k}")
    k = int(round(k))
    n0 = pool_size(beta, c, 0.0)
    draws = sorted(rng.standard_exponential(n0), reverse=True)
    return RecordPool(k=k, beta=beta, c=c, top=draws[: k + 1], pool_count=n0)


@dataclass
class RecordPath:
    times: np.ndarray          # jump epochs of Y (first entry is t=0 if Y is defined there)
    values: np.ndarray         # Y at those epochs
    yk_jumps: np.ndarray       # jump lengths of Y_k (Exp(k) in law)
    pool: RecordPool

    def uncentered_final(self) -> float:
        """Y(T) - (1/beta) log N(T)."""
        return float(self.values[-1]) - math.log(self.pool.pool_count) / self.pool.beta


def simulate_record(pool: RecordPool, T: float, rng,
                    batch: int = _ARRIVAL_BATCH) -> RecordPath:
    """Advance the pool to time T, recording every jump of Y = k * Y_k.

    Arrivals are processed in index batches (their order within a batch is
    irrelevant to the maxima); a candidate must beat the current k-th maximum,
    and the threshold only rises, so filtering each batch against the entry
    threshold is exact.
    """
    beta, c, k = pool.beta, pool.c, pool.k
    n_final = pool_size(beta, c, T)
    top = list(pool.top)                        # kept descending throughout
    count = pool.pool_count
    times, values, jumps = [], [], []
    if len(top) >= k:
        times.append(pool.t)
        values.append(k * top[k - 1])

    def absorb(v: float, j_index: int):
        if len(top) < k:
            top.append(v)
            top.sort(reverse=True)
            if len(top) == k:
                times.append(arrival_time(j_index, beta, c))
                values.append(k * top[k - 1])
            return
        if v <= top[k - 1]:
            if len(top) < k + 1:
                top.append(v)                   # v <= current minimum of the top k
            elif v > top[k]:
                top[k] = v
            return
        old_yk = top[k - 1]
        # insert v among the top k; the old k-th slides to position k+1
        lo = 0
        while lo < k and top[lo] >= v:
            lo += 1
        top.insert(lo, v)
        del top[k + 1:]
        new_yk = top[k - 1]
        times.append(arrival_time(j_index, beta, c))
        values.append(k * new_yk)
        jumps.append(new_yk - old_yk)

    j = count
    while count < n_final:
        b = min(batch, n_final - count)
        draws = rng.standard_exponential(b)
        start = 0
        while len(top) < k + 1 and start < b:
            absorb(float(draws[start]), j + start + 1)
            start += 1
        if start < b:
            sub = draws[start:]
            # The entry threshold only rises within the batch, so filtering
            # against its value at the batch start is a superset of the true
            # record candidates.
            cand = np.nonzero(sub > top[k - 1])[0]
            for ci in cand:
                v = float(sub[ci])
                if v > top[k - 1]:
                    absorb(v, j + start + int(ci) + 1)
            # Draws below the final k-th maximum can still displace the stored
            # (k+1)-st value; the strict inequality excludes absorbed records
            # (ties between distinct draws have probability zero).
            below = sub[sub < top[k - 1]]
            if below.size:
                rest = float(below.max())
                if rest > top[k]:
                    top[k] = rest
        count += b
        j = count
    out = replace(pool, top=top, pool_count=count, t=T)
    return RecordPath(times=np.asarray(times), values=np.asarray(values),
                      yk_jumps=np.asarray(jumps), pool=out)


def sample_final_uncentered(beta: float, c: float, T: float, runs: int, rng) -> np.ndarray:
    """Y(T) - (1/beta) log N(T) over independent runs (the Gumbel-limit sample)."""
    out = np.empty(runs)
    for r in range(runs):
        pool = new_pool(beta, c, rng)
        path = simulate_record(pool, T, rng)
        out[r] = path.uncentered_final()
    return out


# ---------------------------------------------------------------------------
# generalized Gumbel limit law (uncentered form)
# ---------------------------------------------------------------------------


def generalized_gumbel_pdf(beta: float, x):
    """Density of the limit of Y(t) - (1/beta) log N(t):
    (beta / Gamma(1/beta)) exp(-x - e^{-beta x})."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(under="ignore", over="ignore"):
        z = np.exp(-np.clip(beta * x, -700.0, 700.0))
        out = (beta / math.gamma(1.0 / beta)) * np.exp(-x - z)
    return out


def generalized_gumbel_cdf(beta: float, x):
    """CDF of the uncentered limit; closed Poisson-tail form at integer 1/beta."""
    k = 1.0 / beta
    x = np.asarray(x, dtype=float)
    if abs(k - round(k)) < 1e-12:
        with np.errstate(over="ignore"):
            z = np.exp(-np.clip(beta * x, -700.0, 700.0))
        return upper_gamma_regularized(int(round(k)), z)
    return _numeric_cdf(lambda t: generalized_gumbel_pdf(beta, t), -30.0 / beta, 80.0)(x)


def center_shift(beta: float) -> float:
    """Shift psi(1/beta)/beta: adding it to the uncentered variable centers it."""
    return digamma(1.0 / beta) / beta
