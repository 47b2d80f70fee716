"""Worst-case plants.

Three constructive adversaries pick the drift ``f`` or input gain ``b`` for
each hold interval after seeing the held control value:

* ``lemma1``: ``f = 0`` and an input gain large enough to overshoot the
  origin by at least ``c - 1`` times the current state.
* ``lemma2``: bounded ``b`` but a drift ``d_k a x`` with a per-interval
  multiplier ``d_k`` the controller cannot anticipate.
* ``lemma3``: ``b = 1`` and a superlinear drift envelope that beats any
  fixed sampling period far enough from the origin.

The module also holds the class-member plants used to stress the positive
designs (envelope drift with a scheduled input gain, and the interval-wise
worst case for the linear and relay laws).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .control import golden_max
from .integrate import IntervalDynamics, step_affine
from .model import BProfile, Plant, UncertaintyClass, sign

GROWTH_RTOL = 1e-12


class AdversaryInapplicable(ValueError):
    """The construction is undefined for the requested state."""


@dataclass(frozen=True)
class AdversaryConfig:
    which: str
    c: float
    b_lower: float
    b_upper: float = math.inf
    epsilon: Optional[float] = None
    M: Optional[float] = None
    Delta_lower: Optional[float] = None
    Delta: Optional[float] = None
    a: Optional[float] = None
    D: Optional[float] = None
    M_threshold: Optional[float] = None
    notes: dict = field(default_factory=dict)


# -- numerical helpers on the drift envelope -----------------------------------

def infimum_ratio(cls: UncertaintyClass, eps: float, decades: float = 12.0,
                  points: int = 2401) -> float:
    """``inf_{|s| >= eps} psi(s)/|s|``.

    Exact when the envelope is linear (``psi_slope``).  Otherwise a
    log-spaced grid over ``[eps, eps*10^decades]`` on both signs is refined
    by golden-section search.  When the grid minimum sits at the far end the
    infimum is not attained and 0 is returned.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if cls.psi_slope is not None:
        return cls.psi_slope
    s = eps * np.logspace(0.0, decades, points)
    ratio = np.minimum([cls.psi(v) / v for v in s], [cls.psi(-v) / v for v in s])
    i = int(np.argmin(ratio))
    if i == points - 1:
        return 0.0

    def neg_ratio(logv):
        v = math.exp(logv)
        return -min(cls.psi(v), cls.psi(-v)) / v

    lo, hi = math.log(s[max(i - 1, 0)]), math.log(s[min(i + 1, points - 1)])
    return min(float(ratio[i]), -golden_max(neg_ratio, lo, hi))


def superlinear_threshold(cls: UncertaintyClass, level: float, lo: float = 1e-9,
                          hi: float = 1e15, points: int = 2401) -> float:
    """Least ``M`` with ``psi(x)/|x| >= level`` for every ``|x| >= M`` (grid + bisection)."""
    r = np.logspace(math.log10(lo), math.log10(hi), points)
    try:
        ratio = np.minimum(cls.psi(r), cls.psi(-r)) / r
        if np.shape(ratio) != r.shape:
            raise TypeError
    except (TypeError, ValueError):
        # scalar-only envelope
        ratio = np.array([min(cls.psi(v), cls.psi(-v)) / v for v in r])
    ok = ratio >= level
    if not ok[-1]:
        raise ValueError(f"psi(x)/|x| stays below {level:g} up to |x| = {hi:g}")
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(r[0])
    i = int(bad[-1])
    a, b = float(r[i]), float(r[i + 1])
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if min(cls.psi(mid), cls.psi(-mid)) / mid >= level:
            b = mid
        else:
            a = mid
    return b


# -- unbounded input gain ------------------------------------------------------

def lemma1_config(b_lower: float, c: float = 3.0, b_upper: float = math.inf) -> AdversaryConfig:
    if not c > 2.0:
        raise ValueError(f"lemma1 adversary needs c > 2, got {c}")
    return AdversaryConfig("lemma1", c, b_lower, b_upper)


def lemma1_b(x_k: float, u_k: float, dt: float, b_lower: float, c: float) -> float:
    """Input gain committed on the interval.

    ``max(b_lower, c|x|/(|u| dt))``, or ``b_lower`` when ``u = 0``.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if u_k == 0.0:
        return b_lower
    return max(b_lower, c * abs(x_k) / (abs(u_k) * dt))


def lemma1_step(x_k: float, u_k: float, dt: float, b_lower: float, c: float) -> float:
    """Closed-form next state under the lemma1 gain, with the growth postcondition checked."""
    if u_k == 0.0:
        return x_k
    x_next = x_k + max(dt * b_lower * abs(u_k), c * abs(x_k)) * sign(u_k)
    if abs(x_next) < (c - 1.0) * abs(x_k) * (1.0 - GROWTH_RTOL):
        raise ArithmeticError(f"growth postcondition violated: {x_k} -> {x_next}")
    return x_next


class Lemma1Plant(Plant):
    """``f = 0``; ``b_k`` chosen after seeing ``u_k`` (unbounded above)."""

    piecewise_constant = True

    def __init__(self, cfg: AdversaryConfig, name: str = "lemma1"):
        super().__init__(name)
        self.cfg = cfg

    def f(self, x, t, k, u):
        return 0.0

    def b(self, x, t, k, u):
        return self.adversary_state["b"][k]

    def interval(self, k, t, x, u, dt):
        b_k = lemma1_b(x, u, dt, self.cfg.b_lower, self.cfg.c)
        self.adversary_state.setdefault("b", {})[k] = b_k
        # b_k * u without the overflow of b_k for tiny |u|
        beta = 0.0
        if u != 0.0:
            beta = max(self.cfg.b_lower * abs(u), self.cfg.c * abs(x) / dt) * sign(u)
        return IntervalDynamics.affine(0.0, beta, 0.0, b_k)


# -- unknown drift multiplier --------------------------------------------------

def lemma2_config(cls: UncertaintyClass, eps: float, M: float, deltas: Sequence[float],
                  a: Optional[float] = None) -> AdversaryConfig:
    """Adversary parameters for a finite schedule with increments ``deltas``."""
    if not cls.bounded:
        raise ValueError("lemma2 adversary needs a bounded input gain")
    if not 0.0 < eps:
        raise ValueError("eps must be positive")
    if not M > 0.0:
        raise ValueError("M must be positive")
    n = len(deltas)
    if n < 1:
        raise ValueError("need at least one interval")
    if a is None:
        a = infimum_ratio(cls, eps)
    if not a > 0.0:
        raise ValueError("inf_{|s|>=eps} psi(s)/|s| must be positive")
    c = max(1.0, (M / eps) ** (1.0 / n))
    d_low = min(deltas)
    D = _lemma2_gain(a, d_low, c, cls.b_lower, cls.b_upper)
    return AdversaryConfig("lemma2", c, cls.b_lower, cls.b_upper, epsilon=eps, M=M,
                           Delta_lower=d_low, a=a, D=D)


def _lemma2_gain(a, dt, c, b_lower, b_upper):
    return max(2.0 * (1.0 + c) * b_upper / b_lower, math.log(1.0 + 2.0 * (c - 1.0))) / (a * dt)


def lemma2_d(x_k: float, u_k: float, dt: float, cfg: AdversaryConfig) -> float:
    """Drift multiplier for the interval.

    Zero when ``q = b_lower dt u / x <= -(1+c)`` (the control already
    overshoots by at least ``c``); otherwise large enough that the drift
    outruns the control.
    """
    if x_k == 0.0:
        raise AdversaryInapplicable("lemma2 adversary is undefined at x = 0")
    q_low = cfg.b_lower * dt * u_k / x_k
    if q_low <= -(1.0 + cfg.c):
        return 0.0
    return _lemma2_gain(cfg.a, dt, cfg.c, cfg.b_lower, cfg.b_upper)


def lemma2_next(x_k: float, u_k: float, dt: float, b: float, cfg: AdversaryConfig) -> float:
    """State after one interval for a constant admissible gain ``b``."""
    d_k = lemma2_d(x_k, u_k, dt, cfg)
    return step_affine(x_k, cfg.a * d_k, b * u_k, dt)


class Lemma2Plant(Plant):
    """Drift ``d_k a x`` for ``|x| >= eps`` (zero inside), gain from a profile."""

    piecewise_constant = True

    def __init__(self, cfg: AdversaryConfig, profile: BProfile, name: str = "lemma2"):
        super().__init__(name)
        if profile.b_lower < cfg.b_lower or profile.b_upper > cfg.b_upper:
            raise ValueError("b profile leaves the adversary's gain bounds")
        self.cfg = cfg
        self.profile = profile

    def _d(self, k):
        return self.adversary_state["d"][k]

    def f(self, x, t, k, u):
        return self._d(k) * self.cfg.a * x if abs(x) >= self.cfg.epsilon else 0.0

    def b(self, x, t, k, u):
        return self.profile(k)

    def interval(self, k, t, x, u, dt):
        d_k = 0.0 if abs(x) < self.cfg.epsilon else lemma2_d(x, u, dt, self.cfg)
        self.adversary_state.setdefault("d", {})[k] = d_k
        b_k = self.profile(k)
        alpha = self.cfg.a * d_k
        return IntervalDynamics.affine(alpha, b_k * u, alpha * x, b_k)


# -- superlinear drift under a fixed period ------------------------------------

def lemma3_config(cls: UncertaintyClass, c: float, Delta: float) -> AdversaryConfig:
    if not c >= 1.0:
        raise ValueError(f"lemma3 adversary needs c >= 1, got {c}")
    if not Delta > 0.0:
        raise ValueError("Delta must be positive")
    M = superlinear_threshold(cls, (1.0 + 2.0 * c) / Delta)
    return AdversaryConfig("lemma3", c, 1.0, 1.0, Delta=Delta, M_threshold=M)


def lemma3_f(x_k: float, u_k: float, dt: float, cfg: AdversaryConfig,
             cls: UncertaintyClass) -> float:
    """Constant drift for the interval: 0 below the threshold or when the
    control alone overshoots, otherwise the full envelope pushing outward."""
    if abs(x_k) < cfg.M_threshold:
        return 0.0
    if abs(u_k) >= (1.0 + cfg.c) * abs(x_k) / dt:
        return 0.0
    return cls.psi(x_k) * sign(x_k)


def lemma3_step(x_k, u_k, dt, cfg, cls):
    """Next state with ``b = 1``; growth by ``c`` is checked above the threshold."""
    x_next = step_affine(x_k, 0.0, lemma3_f(x_k, u_k, dt, cfg, cls) + u_k, dt)
    if abs(x_k) >= cfg.M_threshold and abs(x_next) < cfg.c * abs(x_k) * (1.0 - GROWTH_RTOL):
        raise ArithmeticError(f"growth postcondition violated: {x_k} -> {x_next}")
    return x_next


class Lemma3Plant(Plant):
    piecewise_constant = True

    def __init__(self, cfg: AdversaryConfig, cls: UncertaintyClass, name: str = "lemma3"):
        super().__init__(name)
        self.cfg = cfg
        self.cls = cls
        self.reset()

    def f(self, x, t, k, u):
        return self.adversary_state["f"][k]

    def b(self, x, t, k, u):
        return 1.0

    def reset(self):
        super().reset()
        self._f = self.adversary_state["f"] = {}

    def interval(self, k, t, x, u, dt):
        f_k = lemma3_f(x, u, dt, self.cfg, self.cls)
        self._f[k] = f_k
        return IntervalDynamics.affine(0.0, f_k + u, f_k, 1.0)


# -- class members for the positive designs ------------------------------------

DRIFTS = ("zero", "outward", "inward", "flip")


class EnvelopePlant(Plant):
    """``f = s_k psi(x) sign(x)`` with ``s_k`` in {0, +1, -1, (-1)^k}.

    Lies in the practical class by construction.  With a linear envelope the
    interval dynamics are affine and integrated exactly.
    """

    def __init__(self, cls: UncertaintyClass, drift: str, profile: BProfile,
                 name: Optional[str] = None):
        if drift not in DRIFTS:
            raise ValueError(f"unknown drift {drift!r}; expected one of {DRIFTS}")
        super().__init__(name or f"envelope-{drift}-{profile.kind}")
        self.cls = cls
        self.drift = drift
        self.profile = profile
        self.piecewise_constant = False

    def _s(self, k):
        if self.drift == "zero":
            return 0.0
        if self.drift == "outward":
            return 1.0
        if self.drift == "inward":
            return -1.0
        return 1.0 if k % 2 == 0 else -1.0

    def f(self, x, t, k, u):
        return self._s(k) * self.cls.psi(x) * sign(x)

    def b(self, x, t, k, u):
        return self.profile(k)

    def interval(self, k, t, x, u, dt):
        if self.cls.psi_slope is None:
            return super().interval(k, t, x, u, dt)
        alpha = self._s(k) * self.cls.psi_slope
        b_k = self.profile(k)
        return IntervalDynamics.affine(alpha, b_k * u, alpha * x, b_k)


class WorstCasePlant(Plant):
    """Per-interval worst case over ``f in {+F, -F}``, ``b in {b_lower, b_upper}``.

    ``F`` is ``f_outer`` when ``|x_k| > eps`` and ``f_inner`` otherwise; the
    pair maximizing ``|x_{k+1}|`` is committed.  Using the sup-envelope
    values ``psi_bar`` makes this plant dominate every class member the
    contraction and invariance bounds are derived for.
    """

    piecewise_constant = True

    def __init__(self, b_lower: float, b_upper: float, f_outer: float,
                 f_inner: Optional[float] = None, eps: Optional[float] = None,
                 name: str = "worst-case"):
        super().__init__(name)
        self.b_lower = b_lower
        self.b_upper = b_upper
        self.f_outer = f_outer
        self.f_inner = f_outer if f_inner is None else f_inner
        self.eps = eps

    def f(self, x, t, k, u):
        return self.adversary_state["fb"][k][0]

    def b(self, x, t, k, u):
        return self.adversary_state["fb"][k][1]

    def interval(self, k, t, x, u, dt):
        F = self.f_outer if self.eps is None or abs(x) > self.eps else self.f_inner
        best = None
        for f in (F, -F):
            for b in (self.b_lower, self.b_upper):
                size = abs(x + dt * (f + b * u))
                if best is None or size > best[0]:
                    best = (size, f, b)
        _, f, b = best
        self.adversary_state.setdefault("fb", {})[k] = (f, b)
        return IntervalDynamics.affine(0.0, f + b * u, f, b)
