"""Single hold-interval propagation of the scalar closed loop.

Two routes are provided.  ``step_affine`` is the closed-form solution of
``x' = alpha*x + beta`` and is used whenever the plant commits
piecewise-constant data on the interval.  ``step_general`` is an adaptive
Dormand-Prince 5(4) integrator for state-dependent drift and input gain.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

DEFAULT_TOL = 1e-12
SERIES_SWITCH = 1e-8
N_DENSE = 8

AFFINE = "affine-exact"
GENERAL = "general"


class StiffnessError(RuntimeError):
    """Adaptive step size fell below the underflow guard."""


class IntervalDynamics(NamedTuple):
    """Right-hand side committed by a plant for one hold interval.

    In ``affine-exact`` mode the interval dynamics are ``alpha*x + beta``
    where ``beta`` already contains ``b_k * u_k``.  In ``general`` mode
    ``f_general(x, t)`` and ``b_general(x, t)`` are integrated numerically.
    ``f0`` and ``b0`` are the values at the interval start, kept for the
    trajectory record.
    """

    mode: str
    alpha: float = 0.0
    beta: float = 0.0
    f_general: Optional[Callable[[float, float], float]] = None
    b_general: Optional[Callable[[float, float], float]] = None
    f0: float = 0.0
    b0: float = 0.0

    @classmethod
    def affine(cls, alpha: float, beta: float, f0: float = 0.0, b0: float = 0.0):
        # skips the keyword-handling constructor; called once per simulated step
        return tuple.__new__(cls, (AFFINE, alpha, beta, None, None, f0, b0))

    @classmethod
    def general(cls, f_general: Callable[[float, float], float],
                b_general: Callable[[float, float], float],
                f0: float = 0.0, b0: float = 0.0):
        if f_general is None or b_general is None:
            raise ValueError("general mode needs f_general and b_general")
        return cls(GENERAL, 0.0, 0.0, f_general, b_general, f0, b0)


class StepResult(NamedTuple):
    x: float
    dense: list  # [(t_offset, x), ...] within (0, dt]
    crossed_zero: bool


def _phi1(z: float) -> float:
    # (e^z - 1)/z, accurate at z -> 0
    if abs(z) < SERIES_SWITCH:
        return 1.0 + z / 2.0 + z * z / 6.0
    return math.expm1(z) / z


def step_affine(x: float, alpha: float, beta: float, dt: float) -> float:
    """Exact solution of ``x' = alpha*x + beta`` after time ``dt``.

    Returns a signed infinity instead of raising when the exponential
    overflows; the caller turns that into an overflow event.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if alpha == 0.0:
        return x + beta * dt
    drift = alpha * x + beta
    if drift == 0.0:
        return x
    try:
        return x + drift * dt * _phi1(alpha * dt)
    except OverflowError:
        return math.copysign(math.inf, drift)


def affine_point(x: float, alpha: float, beta: float, s: float) -> float:
    """Closed-form state at offset ``s`` (``s = 0`` allowed)."""
    if s == 0.0:
        return x
    return step_affine(x, alpha, beta, s)


def affine_dense(x: float, alpha: float, beta: float, dt: float, n: int = N_DENSE):
    return [(dt * j / n, affine_point(x, alpha, beta, dt * j / n)) for j in range(1, n + 1)]


def crossed(x0: float, x1: float) -> bool:
    """Sign change between two samples, in the sense x1*x0 <= 0 with x0 != 0."""
    return x0 != 0.0 and x0 * x1 <= 0.0


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _hermite(s0, y0, f0, s1, y1, f1, s):
    h = s1 - s0
    th = (s - s0) / h
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th * th * (3 - 2 * th)
    h11 = th * th * (th - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def step_general(x: float, dyn: IntervalDynamics, u_bar: float, dt: float,
                 tol: float = DEFAULT_TOL, t0: float = 0.0,
                 n_dense: int = N_DENSE) -> StepResult:
    """Integrate ``x' = f(x,t) + b(x,t)*u_bar`` over ``[t0, t0+dt]``.

    Local error per accepted step is kept below ``tol * max(1, |x|)``.
    Dense output is cubic Hermite on accepted steps, sampled at
    ``n_dense`` evenly spaced offsets ending at ``dt``.
    """
    if not 0.0 < tol <= 1e-3:
        raise ValueError(f"tol must lie in (0, 1e-3], got {tol!r}")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if dyn.mode == AFFINE:
        f_gen = lambda y, t: dyn.alpha * y + dyn.beta  # noqa: E731
        b_gen = lambda y, t: 0.0  # noqa: E731
    else:
        f_gen, b_gen = dyn.f_general, dyn.b_general

    def rhs(s, y):
        t = t0 + s
        return f_gen(y, t) + b_gen(y, t) * u_bar

    h_min = 1e-14 * dt
    s, y = 0.0, x
    k1 = rhs(s, y)
    nodes = [(s, y, k1)]
    h = min(dt, 0.01 * dt if k1 == 0.0 else max(h_min, 0.01 * max(1.0, abs(y)) / abs(k1)))
    h = min(h, dt)
    sign_change = False
    while s < dt:
        if h < h_min:
            raise StiffnessError(f"step size {h:.3e} below {h_min:.3e}")
        last = s + h >= dt
        if last:
            h = dt - s
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_A[i], ks))
            ks.append(rhs(s + _C[i] * h, yi))
        y_new = y + h * sum(a * kj for a, kj in zip(_A[6], ks[:6]))
        err = abs(h * sum(e * kj for e, kj in zip(_E, ks)))
        scale = tol * max(1.0, abs(y), abs(y_new))
        ratio = err / scale
        if not math.isfinite(y_new):
            ratio = math.inf
        if ratio <= 1.0:
            s = dt if last else s + h
            if crossed(x, y_new) or crossed(y, y_new):
                sign_change = True
            y, k1 = y_new, ks[6]
            nodes.append((s, y, k1))
        factor = 5.0 if ratio == 0.0 else min(5.0, max(0.2, 0.9 * ratio ** -0.2))
        h *= factor

    dense = []
    j = 1
    for n in range(n_dense):
        target = dt * (n + 1) / n_dense
        while j < len(nodes) - 1 and nodes[j][0] < target:
            j += 1
        s0, y0, f0 = nodes[j - 1]
        s1, y1, f1 = nodes[j]
        dense.append((target, y1 if target >= s1 else _hermite(s0, y0, f0, s1, y1, f1, target)))
    return StepResult(y, dense, sign_change)
