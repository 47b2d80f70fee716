"""Sampling-instant generators.

Accumulating schedules (geometric and stretched) approach the deadline
``t0 + T`` and are truncated after ``k_max`` steps, or earlier once the next
instant is no longer representable as a distinct float.  Their increments
are computed directly from the time-to-go in log domain, never by
differencing instants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

K_MAX_DEFAULT = 200

UNIFORM = "uniform"
GEOMETRIC = "geometric"
STRETCHED = "stretched"
EXPLICIT = "explicit-list"
STATE_DEPENDENT = "state-dependent"


@dataclass(frozen=True)
class SamplingSchedule:
    """Sampling instants ``t_0 < t_1 < ...`` and their increments.

    ``instants`` has one more entry than ``deltas``.  A state-dependent
    schedule only stores ``t0``; ``rule(xs, ts)`` returns the next instant
    from the history, or ``None`` once the run is over.
    ``n_nominal`` is the index of the deadline instant for finite schedules;
    instants past it (``tail`` steps) are only used to check behaviour after
    the deadline.
    """

    kind: str
    t0: float
    T: float
    instants: tuple = ()
    deltas: tuple = ()
    params: dict = field(default_factory=dict)
    k_max: Optional[int] = None
    truncation: Optional[str] = None
    n_nominal: Optional[int] = None
    rule: Optional[Callable] = None

    @property
    def deadline(self) -> float:
        return self.t0 + self.T

    @property
    def n_intervals(self) -> int:
        return len(self.deltas)

    def describe(self) -> str:
        items = ", ".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({items})"


def _check_horizon(t0: float, T: float) -> None:
    if not (math.isfinite(t0) and math.isfinite(T)) or T <= 0.0:
        raise ValueError(f"need finite t0 and T > 0, got t0={t0}, T={T}")


def uniform(t0: float, T: float, N: int, tail: int = 0) -> SamplingSchedule:
    """``t_k = t0 + k*T/N`` for ``k = 0..N`` (plus ``tail`` steps past the deadline)."""
    _check_horizon(t0, T)
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if tail < 0:
        raise ValueError("tail must be nonnegative")
    N = int(N)
    dt = T / N
    instants = [t0 + k * dt for k in range(N + 1 + tail)]
    instants[N] = t0 + T
    return SamplingSchedule(UNIFORM, t0, T, tuple(instants), (dt,) * (N + tail),
                            {"N": N, "Delta": dt, "tail": tail}, n_nominal=N)


def explicit(instants) -> SamplingSchedule:
    """Schedule from a given strictly increasing list; first entry is ``t0``."""
    ts = [float(t) for t in instants]
    if len(ts) < 2:
        raise ValueError("need at least two instants")
    deltas = [b - a for a, b in zip(ts, ts[1:])]
    if any(not d > 0.0 for d in deltas):
        raise ValueError("instants must be strictly increasing")
    return SamplingSchedule(EXPLICIT, ts[0], ts[-1] - ts[0], tuple(ts), tuple(deltas),
                            {"count": len(ts)}, n_nominal=len(deltas))


def _accumulating(kind, t0, T, log_togo, log_step_frac, k_max, params):
    # log_togo(k): log of (t0+T - t_k)/T; log_step_frac(k): log of Delta_k/(T*togo_k)
    _check_horizon(t0, T)
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    end = t0 + T
    instants = [t0]
    deltas = []
    truncation = "k_max"
    for k in range(k_max):
        lt = log_togo(k + 1)
        t_next = end - T * math.exp(lt)
        if not t_next > instants[-1]:
            truncation = "resolution"
            break
        deltas.append(T * math.exp(log_togo(k) + log_step_frac(k)))
        instants.append(t_next)
    return SamplingSchedule(kind, t0, T, tuple(instants), tuple(deltas), params,
                            k_max=k_max, truncation=truncation)


def period_count(T: float, bound: float) -> int:
    """Smallest ``N`` with ``T/N <= bound``.

    Ratios within 1e-12 (relative) of an integer snap to it, so that a bound
    that is exactly ``T/N`` up to rounding yields ``N`` rather than ``N + 1``.
    """
    if not bound > 0.0:
        raise ValueError(f"period bound must be positive, got {bound!r}")
    ratio = T / bound
    if math.isinf(ratio):
        raise ValueError("period bound underflows")
    nearest = round(ratio)
    if nearest >= 1 and abs(ratio - nearest) <= 1e-12 * nearest:
        return int(nearest)
    return max(1, math.ceil(ratio))


def _check_a(a: float) -> None:
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0, 1), got {a!r}")


def geometric(a: float, k_max: int = K_MAX_DEFAULT, t0: float = 0.0,
              T: float = 1.0) -> SamplingSchedule:
    """``t_k = t0 + T(1 - a^k)`` with increments ``T a^k (1 - a)``."""
    _check_a(a)
    _check_horizon(t0, T)
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    instants = [t0]
    deltas = []
    truncation = "k_max"
    for k in range(k_max):
        t_next = t0 + T * (1.0 - a ** (k + 1))
        if not t_next > instants[-1]:
            truncation = "resolution"
            break
        deltas.append(T * a ** k * (1.0 - a))
        instants.append(t_next)
    return SamplingSchedule(GEOMETRIC, t0, T, tuple(instants), tuple(deltas),
                            {"a": a, "k_max": k_max}, k_max=k_max, truncation=truncation)


def _root_step(k: int, q: float) -> float:
    """``(k+1)^q - k^q`` without cancellation."""
    if k == 0:
        return 1.0
    return k ** q * math.expm1(q * math.log1p(1.0 / k))


def stretched(a: float, m: int, k_max: int = K_MAX_DEFAULT, t0: float = 0.0,
              T: float = 1.0) -> SamplingSchedule:
    """``t_k = t0 + T(1 - a^(k^q))`` with ``q = 1/(m^2 + 1)``."""
    _check_a(a)
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    q = 1.0 / (m * m + 1)
    la = math.log(a)
    return _accumulating(
        STRETCHED, t0, T,
        lambda k: (k ** q) * la,
        lambda k: math.log(-math.expm1(_root_step(k, q) * la)),
        k_max, {"a": a, "m": int(m), "q": q, "k_max": k_max})


def example2_log_ratio(a: float, m: int, k: int) -> float:
    """Natural log of ``(a^(k^q) - a^((k+1)^q)) / a^(m k^q)``."""
    _check_a(a)
    q = 1.0 / (m * m + 1)
    la = math.log(a)
    kq = float(k) ** q
    return (1 - m) * kq * la + math.log(-math.expm1(_root_step(k, q) * la))


def example2_ratio(a: float, m: int, k: int) -> float:
    """Normalized update ``k(t_k) Delta_k / A`` on the stretched schedule."""
    lr = example2_log_ratio(a, m, k)
    return math.inf if lr > 709.0 else math.exp(lr)


def from_initial_state(t0: float, T: float, delta_rule: Callable[[float], float],
                       tail: int = 0) -> SamplingSchedule:
    """Uniform sampling whose period is picked after the first measurement.

    ``delta_rule(x0)`` returns an upper bound on the period; it is rounded
    down so that ``T/Delta`` is an integer.
    """
    _check_horizon(t0, T)

    def rule(xs, ts):
        n = period_count(T, delta_rule(xs[0]))
        k = len(ts) - 1
        if k >= n + tail:
            return None
        return t0 + T if k + 1 == n else t0 + (k + 1) * (T / n)

    return SamplingSchedule(STATE_DEPENDENT, t0, T, (t0,), (), {"tail": tail}, rule=rule)
