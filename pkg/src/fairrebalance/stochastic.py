"""Numerical primitives for the demand model.

Modified Bessel functions of the first kind, the Skellam distribution, the
left-censored occupancy transition built on it, and a seeded random source
with a Poisson sampler that can be consumed from compiled kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "RandomSource",
    "SkellamParams",
    "bessel_i",
    "bessel_i_scaled",
    "skellam_pmf",
    "censored_transition",
    "censored_transition_row",
    "sample_poisson",
    "sample_poisson_many",
]

_SERIES_LIMIT = 30.0
_TAIL_TOL = 1e-12
_MAX_ORDER = 1000
_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


class RandomSource:
    """Seeded random stream backed by numpy's PCG64 bit generator.

    The stream is single-owner: every draw advances ``generator`` and nothing
    reseeds it. Compiled kernels receive ``generator`` directly, so draws made
    there and draws made through the methods below share one sequence.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.generator = np.random.Generator(np.random.PCG64(seed))

    def random(self) -> float:
        return float(self.generator.random())

    def integers(self, high: int) -> int:
        return int(self.generator.integers(high))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"


@dataclass(frozen=True)
class SkellamParams:
    """Rates of a birth-death window: arrivals and departures per period, over ``t`` periods."""

    lambda_a: float
    lambda_d: float
    t: float = 1.0

    def __post_init__(self):
        if not (self.lambda_a >= 0 and self.lambda_d >= 0):
            raise ValueError(f"rates must be nonnegative, got {self.lambda_a}, {self.lambda_d}")
        if not self.t > 0:
            raise ValueError(f"elapsed time must be positive, got {self.t}")

    @property
    def mean_arrivals(self) -> float:
        return self.lambda_a * self.t

    @property
    def mean_departures(self) -> float:
        return self.lambda_d * self.t


def _check_bessel_args(n, x):
    if x < 0 or math.isnan(x):
        raise ValueError(f"bessel_i requires x >= 0, got {x}")
    n = abs(int(n))
    if n > _MAX_ORDER:
        raise ValueError(f"order |n| must be <= {_MAX_ORDER}, got {n}")
    return n


def _series_scaled(n: int, x: float) -> float:
    # sum_k (x/2)^(2k+n) / (k! (k+n)!), times exp(-x); first term in log space
    # so that large orders underflow cleanly instead of overflowing.
    half = 0.5 * x
    if n == 0:
        log_first = -x
    else:
        log_first = n * (math.log(x) - math.log(2.0)) - math.lgamma(n + 1) - x
    if log_first < -745.0:
        return 0.0
    term = 1.0
    total = 1.0
    q = half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if term < 1e-17 * total:
            break
    return total * math.exp(log_first)


def _miller_scaled(n: int, x: float) -> float:
    # Backward recurrence I_{k-1} = (2k/x) I_k + I_{k+1} from well beyond
    # max(n, x), normalised with exp(x) = I_0 + 2 sum_{k>=1} I_k.
    top = int(max(n, x)) + 20 + int(math.sqrt(40.0 * max(n, x)))
    i_next, i_cur = 0.0, 1e-300
    total = 0.0
    found = 0.0
    for k in range(top, 0, -1):
        i_prev = (2.0 * k / x) * i_cur + i_next
        i_next, i_cur = i_cur, i_prev
        total += 2.0 * i_next
        if k - 1 == n:
            found = i_cur
        if i_cur > 1e250:
            i_cur *= 1e-250
            i_next *= 1e-250
            total *= 1e-250
            found *= 1e-250
    total += i_cur
    if n == 0:
        found = i_cur
    return found / total


def bessel_i_scaled(n: int, x: float) -> float:
    """Return ``exp(-x) * I_n(x)``, safe for arguments where ``I_n`` overflows."""
    n = _check_bessel_args(n, x)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x <= _SERIES_LIMIT:
        return _series_scaled(n, x)
    return _miller_scaled(n, x)


def bessel_i(n: int, x: float) -> float:
    """Modified Bessel function of the first kind ``I_n(x)`` for integer order.

    Uses the power series for ``x <= 30`` and a normalised backward
    recurrence above that. ``I_{-n} = I_n``.

    Raises
    ------
    ValueError
        If ``x < 0`` or ``|n| > 1000``.
    OverflowError
        If the result exceeds the largest representable float.
    """
    scaled = bessel_i_scaled(n, x)
    if scaled == 0.0:
        return 0.0
    log_value = x + math.log(scaled)
    if log_value > _LOG_FLOAT_MAX:
        raise OverflowError(f"I_{n}({x}) exceeds the floating point range")
    return math.exp(log_value)


def _poisson_pmf(k: int, mean: float) -> float:
    if k < 0:
        return 0.0
    if mean == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))


def skellam_pmf(n: int, params: SkellamParams) -> float:
    """Probability that arrivals minus departures over the window equals ``n``.

    Degenerate rates reduce to a Poisson law on one side of zero.
    """
    n = int(n)
    mu_a = params.mean_arrivals
    mu_d = params.mean_departures
    if mu_d == 0.0:
        return _poisson_pmf(n, mu_a)
    if mu_a == 0.0:
        return _poisson_pmf(-n, mu_d)
    x = 2.0 * math.sqrt(mu_a * mu_d)
    if abs(n) > _MAX_ORDER:
        return 0.0
    scaled = bessel_i_scaled(n, x)
    if scaled == 0.0:
        return 0.0
    log_p = -(mu_a + mu_d) + x + 0.5 * n * (math.log(mu_a) - math.log(mu_d)) + math.log(scaled)
    return min(1.0, math.exp(log_p))


def _censored_mass(m: int, params: SkellamParams) -> float:
    # P(net change <= -m): sum_{l >= m} p(-l), summed outward until the terms
    # are past the mode and below tolerance.
    mean_drop = params.mean_departures - params.mean_arrivals
    total = 0.0
    l = m
    while True:
        term = skellam_pmf(-l, params)
        total += term
        if l > mean_drop + 1 and term < _TAIL_TOL * 1e-4:
            break
        if l - m > _MAX_ORDER:
            break
        l += 1
    return min(1.0, total)


def censored_transition(m: int, n: int, params: SkellamParams) -> float:
    """Left-censored occupancy transition probability from ``m`` to ``n`` vehicles."""
    if m < 0 or n < 0:
        raise ValueError(f"occupancies must be nonnegative, got m={m}, n={n}")
    if n > 0:
        return skellam_pmf(n - m, params)
    return _censored_mass(int(m), params)


def censored_transition_row(m: int, params: SkellamParams, cap: int) -> np.ndarray:
    """Transition row from ``m`` over states ``0..cap``, with mass above ``cap`` folded into it."""
    if m < 0 or cap < 1:
        raise ValueError(f"need m >= 0 and cap >= 1, got m={m}, cap={cap}")
    row = np.empty(cap + 1)
    row[0] = censored_transition(m, 0, params)
    for n in range(1, cap + 1):
        row[n] = skellam_pmf(n - m, params)
    row[cap] = max(0.0, 1.0 - row[:cap].sum())
    return row


@numba.njit(cache=True)
def _poisson(rate, gen):
    if rate <= 0.0:
        return 0
    if rate < 10.0:
        # inversion by sequential search
        u = gen.random()
        p = math.exp(-rate)
        cdf = p
        k = 0
        while u > cdf and k < 400:
            k += 1
            p *= rate / k
            cdf += p
        return k
    # transformed rejection with squeeze (Hormann's PTRS)
    slam = math.sqrt(rate)
    loglam = math.log(rate)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = gen.random() - 0.5
        v = gen.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + rate + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -rate + k * loglam - math.lgamma(k + 1.0)):
            return int(k)


@numba.njit(cache=True)
def _poisson_many(rate, size, gen):
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        out[i] = _poisson(rate, gen)
    return out


def _check_rate(rate):
    if not rate >= 0:
        raise ValueError(f"Poisson rate must be nonnegative, got {rate}")
    if rate > 1e6:
        raise ValueError(f"Poisson rate must be <= 1e6, got {rate}")


def sample_poisson(rate: float, rng: RandomSource) -> int:
    """Draw one Poisson variate. A zero rate returns 0 without consuming the stream."""
    _check_rate(rate)
    return int(_poisson(float(rate), rng.generator))


def sample_poisson_many(rate: float, size: int, rng: RandomSource) -> np.ndarray:
    _check_rate(rate)
    return _poisson_many(float(rate), int(size), rng.generator)
