"""Sampled control laws and the helper functions they are built from."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import integrate

from .model import Controller, UncertaintyClass, sign

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PhiFunction:
    """``phi(z) = kappa (sqrt(z) + z^(3/2))``.

    Since the integral of ``1/(sqrt(z)(1+z))`` over ``(0, inf)`` is ``pi``,
    ``kappa = pi/T`` makes the settling-time integral of ``1/phi`` equal ``T``.
    """

    kappa: float
    T: float

    @classmethod
    def for_horizon(cls, T: float) -> "PhiFunction":
        if not T > 0.0:
            raise ValueError(f"T must be positive, got {T}")
        return cls(math.pi / T, T)

    def __call__(self, z: float) -> float:
        r = math.sqrt(z)
        return self.kappa * (r + z * r)

    def reciprocal_integral(self) -> float:
        """Quadrature of the integral of ``1/phi`` over ``(0, inf)``."""
        g = lambda z: 1.0 / self(z)  # noqa: E731
        head, _ = integrate.quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
        rest, _ = integrate.quad(g, 1.0, math.inf, epsabs=0.0, epsrel=1e-12, limit=200)
        return head + rest


def gain_tv(A: float, m: int, T: float, t: float, t0: float = 0.0) -> float:
    """Deadline-blowing gain ``A / (t0 + T - t)^m``."""
    togo = t0 + T - t
    if not togo > 0.0:
        raise ValueError(f"t={t} is at or past the deadline {t0 + T}")
    return A / togo ** m


def golden_max(fn, lo, hi, iters=80):
    """Maximum of a unimodal ``fn`` on ``[lo, hi]`` by golden-section search."""
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = fn(d)
    return max(fc, fd)


def psi_bar_resolution(r: float, density: float = 1.0) -> float:
    """Grid spacing used by :func:`psi_bar` for a non-monotone envelope."""
    n = max(10_001, int(10_000 * density) | 1)
    return 2.0 * r / (n - 1)


def psi_bar(cls: UncertaintyClass, r: float, density: float = 1.0) -> float:
    """``sup_{|x| <= r} psi(x)``.

    Exact for envelopes flagged ``psi_monotone_even``.  Otherwise a symmetric
    grid of at least ``1e4 * density`` points is scanned and the best cell is
    refined by golden-section search; the result is a lower bound whose
    resolution is :func:`psi_bar_resolution`.
    """
    if not r >= 0.0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    if cls.psi_monotone_even or r == 0.0:
        return cls.envelope(r)
    n = max(10_001, int(10_000 * density) | 1)
    grid = np.linspace(-r, r, n)
    values = np.array([cls.psi(x) for x in grid])
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    return max(float(values[i]), golden_max(cls.psi, lo, hi))


def law_prescribed(cls: UncertaintyClass, phi: PhiFunction, x: float) -> float:
    """``-(psi(x) + phi(|x|)) sign(x) / b_lower``."""
    if x == 0.0:
        return 0.0
    return -(cls.psi(x) + phi(abs(x))) * sign(x) / cls.b_lower


def law_linear(K: float, x: float) -> float:
    return -K * x


def law_relay(C: float, x: float) -> float:
    return -C * sign(x)


def law_composite(K: float, C: float, eps: float, x: float) -> float:
    """Linear law outside the ball ``|x| <= eps``, relay inside it."""
    if abs(x) > eps:
        return -K * x
    return -C * sign(x)


# Controller factories.  Laws are partials of module-level functions so that
# controllers stay picklable for process-based sweeps.

def _zero(x, t, k):
    return 0.0


def _linear(K, x, t, k):
    return -K * x


def _relay(C, x, t, k):
    return law_relay(C, x)


def _composite(K, C, eps, x, t, k):
    return law_composite(K, C, eps, x)


def _prescribed(cls, phi, x, t, k):
    return law_prescribed(cls, phi, x)


def _example1(A, m, T, t0, x, t, k):
    return -gain_tv(A, m, T, t, t0) * x


def zero_controller() -> Controller:
    return Controller(_zero, "zero")


def linear_controller(K: float) -> Controller:
    return Controller(partial(_linear, K), f"linear(K={K:g})")


def relay_controller(C: float) -> Controller:
    if not C > 0.0:
        raise ValueError("relay amplitude must be positive")
    return Controller(partial(_relay, C), f"relay(C={C:g})")


def composite_controller(K: float, C: float, eps: float) -> Controller:
    return Controller(partial(_composite, K, C, eps), f"composite(K={K:g},C={C:g},eps={eps:g})")


def prescribed_controller(cls: UncertaintyClass, phi: PhiFunction) -> Controller:
    if not math.isfinite(cls.b_lower):
        raise ValueError("prescribed law needs a finite b_lower")
    return Controller(partial(_prescribed, cls, phi), f"prescribed(kappa={phi.kappa:g})")


def example1_controller(A: float, m: int, T: float = 1.0, t0: float = 0.0) -> Controller:
    """``u_k = -A x_k / (t0 + T - t_k)^m`` sampled at ``t_k``."""
    if not A > 0.0 or m < 1:
        raise ValueError("need A > 0 and m >= 1")
    return Controller(partial(_example1, A, m, T, t0), f"tv-gain(A={A:g},m={m})")
