"""Noise-level schedules: constant, stepwise-linear decay, and the
rate-optimal level driven by the intrinsic dimension.

The rate-optimal level for N observed samples is

    eps_stat(N) = c0 / E|Y| * { N^(-1/2)         m = 1
                              { (ln N / N)^(1/2)  m = 2
                              { N^(-1/m)          m >= 3

Stepwise schedules hold eps constant within periods of P iterations so the
network's input distribution is piecewise-stationary; the sample count n is
cumulative from the start of the run (n = iterations * batch_size).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError

CONSTANT = "constant"
STEPWISE_LINEAR = "stepwise_linear"
RATE_OPTIMAL = "rate_optimal"
SCHEDULE_KINDS = (CONSTANT, STEPWISE_LINEAR, RATE_OPTIMAL)


def epsilon_stat(n_samples: int, m: int, e_abs_y: float, c0: float = 1.0) -> float:
    """Largest noise level still attaining the optimal statistical rate.

    When N is a perfect m-th power the root is evaluated exactly (e.g.
    N = 10^6, m = 3 gives exactly 1e-2 for unit prefactors).
    """
    if n_samples < 2:
        raise ConfigurationError(f"epsilon_stat needs N >= 2, got {n_samples}")
    if m < 1:
        raise ConfigurationError(f"intrinsic dimension must be >= 1, got {m}")
    if e_abs_y <= 0 or c0 <= 0:
        raise ConfigurationError("E|Y| and c0 must be positive")
    if m == 1:
        rate = 1.0 / math.sqrt(n_samples)
    elif m == 2:
        rate = math.sqrt(math.log(n_samples) / n_samples)
    else:
        root = n_samples ** (1.0 / m)
        snapped = round(root)
        if snapped >= 1 and snapped**m == n_samples:
            root = float(snapped)
        rate = 1.0 / root
    return c0 / e_abs_y * rate


@dataclass(frozen=True)
class NoiseSchedule:
    """Tagged schedule configuration.

    constant:        eps
    stepwise_linear: sigma_max, sigma_min, period P, total K (iterations)
    rate_optimal:    m, e_abs_y, c0, eps_min, period P (iterations)

    ``batch_size`` converts the cumulative sample count n into the iteration
    index k = (n - 1) // batch_size used by the stepwise rules.
    """

    kind: str
    eps: float = 0.0
    sigma_max: float = 0.2
    sigma_min: float = 0.05
    period: int = 2000
    total: int = 20000
    m: int = 1
    e_abs_y: float = 1.0
    c0: float = 1.0
    eps_min: float = 0.0
    batch_size: int = 128

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.eps < 0 or self.eps_min < 0:
            raise ConfigurationError("noise levels must be >= 0")
        if self.kind == STEPWISE_LINEAR:
            if self.sigma_max < self.sigma_min:
                raise ConfigurationError("sigma_max must be >= sigma_min")
            if self.period < 1 or self.total < 1:
                raise ConfigurationError("period and total must be >= 1")
        if self.kind == RATE_OPTIMAL:
            if self.m < 1 or self.e_abs_y <= 0 or self.c0 <= 0:
                raise ConfigurationError("rate_optimal needs m >= 1, E|Y| > 0, c0 > 0")
            if self.period < 1:
                raise ConfigurationError("period must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")


def constant(eps: float) -> NoiseSchedule:
    return NoiseSchedule(kind=CONSTANT, eps=eps)


def stepwise_linear(
    sigma_max: float = 0.2,
    sigma_min: float = 0.05,
    period: int = 2000,
    total: int = 20000,
    batch_size: int = 128,
) -> NoiseSchedule:
    return NoiseSchedule(
        kind=STEPWISE_LINEAR,
        sigma_max=sigma_max,
        sigma_min=sigma_min,
        period=period,
        total=total,
        batch_size=batch_size,
    )


def rate_optimal(
    m: int,
    e_abs_y: float,
    c0: float = 1.0,
    eps_min: float = 0.0,
    period: int = 2000,
    batch_size: int = 128,
) -> NoiseSchedule:
    return NoiseSchedule(
        kind=RATE_OPTIMAL,
        m=m,
        e_abs_y=e_abs_y,
        c0=c0,
        eps_min=eps_min,
        period=period,
        batch_size=batch_size,
    )


def effective_eps(schedule: NoiseSchedule, n_samples_seen: int) -> float:
    """Noise level in force once n samples have been consumed.

    ``n_samples_seen`` counts through the current batch, so iteration k
    (0-based) corresponds to n = (k + 1) * batch_size.  Rate-optimal holds
    eps at the value implied by the last period boundary; during the first
    period, before any boundary, it uses the first batch's count.
    """
    if n_samples_seen < 1:
        raise ConfigurationError("n_samples_seen must be >= 1")
    if schedule.kind == CONSTANT:
        return schedule.eps
    k = (n_samples_seen - 1) // schedule.batch_size
    if schedule.kind == STEPWISE_LINEAR:
        t = ((k // schedule.period) * schedule.period + 1) / schedule.total
        return (1.0 - t) * schedule.sigma_max + t * schedule.sigma_min
    # rate_optimal
    boundary = (k // schedule.period) * schedule.period
    n_boundary = max(boundary * schedule.batch_size, schedule.batch_size, 2)
    return max(
        epsilon_stat(n_boundary, schedule.m, schedule.e_abs_y, schedule.c0),
        schedule.eps_min,
    )


def schedule_trace(schedule: NoiseSchedule, iterations: int):
    """Per-iteration trace: lists (iteration k, samples n, eps)."""
    rows = []
    for k in range(iterations):
        n = (k + 1) * schedule.batch_size
        rows.append((k, n, effective_eps(schedule, n)))
    return rows


def crossover_n(m: int, e_abs_y: float, c0: float, eps: float) -> int:
    """Smallest N with eps_stat(N) <= eps (inverts the rate formula)."""
    if eps <= 0:
        raise ConfigurationError("eps must be positive")
    if m == 1:
        guess = max(2, math.ceil((c0 / (e_abs_y * eps)) ** 2 - 1e-9))
    elif m == 2:
        lo, hi = 2, 4
        while epsilon_stat(hi, m, e_abs_y, c0) > eps:
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if epsilon_stat(mid, m, e_abs_y, c0) <= eps:
                hi = mid
            else:
                lo = mid
        guess = hi
    else:
        guess = max(2, math.ceil((c0 / (e_abs_y * eps)) ** m - 1e-9))
    # float dirt guard: walk to the exact boundary
    while guess > 2 and epsilon_stat(guess - 1, m, e_abs_y, c0) <= eps:
        guess -= 1
    while epsilon_stat(guess, m, e_abs_y, c0) > eps:
        guess += 1
    return guess


def schedule_from_json(obj: dict, batch_size: int = 128) -> NoiseSchedule:
    """Build a schedule from a JSON-style dict (see README for fields)."""
    obj = dict(obj)
    kind = obj.pop("kind")
    obj.setdefault("batch_size", batch_size)
    if kind == CONSTANT:
        return NoiseSchedule(kind=CONSTANT, eps=float(obj["eps"]),
                             batch_size=int(obj["batch_size"]))
    if kind == STEPWISE_LINEAR:
        return stepwise_linear(
            sigma_max=float(obj.get("sigma_max", 0.2)),
            sigma_min=float(obj.get("sigma_min", 0.05)),
            period=int(obj.get("period", 2000)),
            total=int(obj.get("total", 20000)),
            batch_size=int(obj["batch_size"]),
        )
    if kind == RATE_OPTIMAL:
        return rate_optimal(
            m=int(obj["m"]),
            e_abs_y=float(obj["e_abs_y"]),
            c0=float(obj.get("c0", 1.0)),
            eps_min=float(obj.get("eps_min", 0.0)),
            period=int(obj.get("period", 2000)),
            batch_size=int(obj["batch_size"]),
        )
    raise ConfigurationError(f"unknown schedule kind {kind!r}")
