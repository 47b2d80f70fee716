"""Sampling-period and gain synthesis for the two positive designs.

``design_linear`` sizes a uniform period ``Delta``, a linear gain ``K`` and a
relay amplitude ``C`` so that every admissible plant contracts by ``lam`` per
sample outside the ball ``|x| <= eps`` and stays in the ball once inside.
``select_delta_lemma4`` searches a period for the non-Lipschitz prescribed
law, whose convergence guarantee is only existential.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d

from .adversary import EnvelopePlant
from .control import PhiFunction, prescribed_controller, psi_bar
from .model import BProfile, Plant, Trajectory, UncertaintyClass
from .runner import simulate
from .schedules import period_count, uniform

log = logging.getLogger(__name__)

K_RTOL = 1e-9


@dataclass(frozen=True)
class LinearDesign:
    lam: float
    Delta: float
    N: int
    K: float
    C: float
    Delta_inv: float
    psi_bar_M: float
    psi_bar_eps: float
    b_lower: float
    b_upper: float
    M: float
    eps: float
    T: float
    delta_bound: float
    K_upper: float

    @property
    def gain_spread(self) -> float:
        return (self.b_upper - self.b_lower) / (self.b_upper + self.b_lower)

    @property
    def K_slack(self) -> float:
        return self.K_upper - self.K

    @property
    def invariance_ok(self) -> bool:
        return self.Delta <= self.Delta_inv

    def violations(self) -> list[str]:
        """Re-derive every design constraint from the stored numbers."""
        out = []
        spread = (self.b_upper - self.b_lower) / (self.b_upper + self.b_lower)
        if not spread < self.lam < 1.0:
            out.append(f"lambda={self.lam} outside ({spread}, 1)")
        rate = self.psi_bar_M / self.eps
        first = math.inf if rate == 0.0 else (self.lam - spread) / rate
        second = self.T * math.log(1.0 / self.lam) / math.log(self.M / self.eps)
        if self.Delta > min(first, second) * (1.0 + 1e-12):
            out.append(f"Delta={self.Delta} exceeds bound {min(first, second)}")
        if abs(self.N * self.Delta - self.T) > 1e-12 * self.T:
            out.append(f"N*Delta={self.N * self.Delta} != T={self.T}")
        lo = ((1.0 - self.lam) / self.Delta + rate) / self.b_lower
        hi = ((1.0 + self.lam) / self.Delta - rate) / self.b_upper
        if not lo * (1.0 - K_RTOL) <= self.K <= hi * (1.0 + K_RTOL):
            out.append(f"K={self.K} outside [{lo}, {hi}]")
        if not math.isclose(self.C, self.psi_bar_eps / self.b_lower, rel_tol=1e-12):
            out.append("C != psi_bar_eps/b_lower")
        inv = (math.inf if self.psi_bar_eps == 0.0
               else self.eps * self.b_lower / ((self.b_lower + self.b_upper) * self.psi_bar_eps))
        if not math.isclose(self.Delta_inv, inv, rel_tol=1e-12):
            out.append("Delta_inv mismatch")
        return out

    def as_dict(self) -> dict:
        d = asdict(self)
        d["K_slack"] = self.K_slack
        d["invariance_ok"] = self.invariance_ok
        return d


def design_linear(b_lower: float, b_upper: float, cls: UncertaintyClass, M: float,
                  eps: float, T: float, lam: Optional[float] = None,
                  density: float = 1.0) -> LinearDesign:
    """Uniform period, linear gain and relay amplitude for the class bounds.

    ``lam`` defaults to the midpoint of its admissible interval.  ``Delta``
    is the largest value under the period bound with ``T/Delta`` integer and
    ``K`` sits at the lower end of its admissible interval.
    """
    if not 0.0 < b_lower <= b_upper < math.inf:
        raise ValueError(f"need 0 < b_lower <= b_upper < inf, got {b_lower}, {b_upper}")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    if eps >= M:
        raise ValueError(f"eps >= M ({eps} >= {M})")
    if not T > 0.0:
        raise ValueError("T must be positive")
    spread = (b_upper - b_lower) / (b_upper + b_lower)
    if lam is None:
        lam = 0.5 * (spread + 1.0)
    if not spread < lam < 1.0:
        raise ValueError(f"lambda must lie in ({spread:g}, 1), got {lam}")
    pb_M = float(psi_bar(cls, M, density))
    pb_eps = float(psi_bar(cls, eps, density))
    rate = pb_M / eps
    first = math.inf if rate == 0.0 else (lam - spread) / rate
    second = T * math.log(1.0 / lam) / math.log(M / eps)
    bound = min(first, second)
    N = period_count(T, bound)
    Delta = T / N
    K = ((1.0 - lam) / Delta + rate) / b_lower
    K_upper = ((1.0 + lam) / Delta - rate) / b_upper
    if K > K_upper * (1.0 + K_RTOL):
        raise ArithmeticError(f"empty gain interval: K={K} > {K_upper}")
    C = pb_eps / b_lower
    Delta_inv = math.inf if pb_eps == 0.0 else eps * b_lower / ((b_lower + b_upper) * pb_eps)
    return LinearDesign(lam, Delta, N, K, C, Delta_inv, pb_M, pb_eps, b_lower, b_upper, M, eps,
                        T, bound, K_upper)


@dataclass
class ContractionReport:
    passed: bool
    worst_ratio: float
    converged_at: Optional[int]
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_contraction(traj: Trajectory, lam: float, eps: float, N: Optional[int] = None,
                      atol: float = 1e-9) -> ContractionReport:
    """``|x_{k+1}| <= lam |x_k| + atol`` while ``|x_k| >= eps``.

    Also requires some ``|x_l| <= eps`` with ``l <= N`` when ``N`` is given.
    """
    xs = traj.xs()
    worst = 0.0
    bad = []
    for k in range(len(xs) - 1):
        a, b = abs(xs[k]), abs(xs[k + 1])
        if a < eps:
            continue
        worst = max(worst, b / a)
        if b > lam * a + atol:
            bad.append((k, a, b))
    hits = np.flatnonzero(np.abs(xs) <= eps)
    ell = int(hits[0]) if hits.size else None
    reached = ell is not None and (N is None or ell <= N)
    return ContractionReport(not bad and reached, worst, ell, bad)


@dataclass
class InvarianceReport:
    passed: bool
    entered_at: Optional[int]
    max_after_entry: float
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_invariance(traj: Trajectory, eps: float, atol: float = 0.0) -> InvarianceReport:
    """``|x_k| <= eps`` implies ``|x_{k+1}| <= eps`` for every recorded step."""
    xs = np.abs(traj.xs())
    inside = xs <= eps
    bad = [(k, float(xs[k + 1])) for k in range(len(xs) - 1)
           if inside[k] and xs[k + 1] > eps + atol]
    hits = np.flatnonzero(inside)
    entered = int(hits[0]) if hits.size else None
    after = float(xs[entered:].max()) if entered is not None else math.nan
    return InvarianceReport(not bad, entered, after, bad)


# -- prescribed law: period search ---------------------------------------------

def lemma4_q_estimate(cls: UncertaintyClass, phi: PhiFunction, M: float, eps: float,
                      delta: float, points: int = 20001) -> float:
    """Grid estimate of the largest closed-loop velocity within ``|x| <= M + eps``.

    Evaluates ``psi(x) + (b_upper/b_lower) max_{|y-x|<=delta} (psi(y) + phi(|y|))``.
    This under-approximates the true supremum by the grid gap.
    """
    if not cls.bounded:
        raise ValueError("need a bounded input gain")
    R = M + eps
    ys = np.linspace(-(R + delta), R + delta, points)
    h = (ys[-1] - ys[0]) / (points - 1)
    drive = np.array([cls.psi(y) + phi(abs(y)) for y in ys])
    width = 2 * int(math.ceil(delta / h)) + 1
    drive_max = maximum_filter1d(drive, size=width, mode="nearest")
    keep = np.abs(ys) <= R
    psi_x = np.array([cls.psi(y) for y in ys[keep]])
    q = psi_x + (cls.b_upper / cls.b_lower) * drive_max[keep]
    # endpoints exactly on |x| = R
    edge = max(cls.psi(R), cls.psi(-R)) + (cls.b_upper / cls.b_lower) * max(
        cls.psi(R + delta) + phi(R + delta), cls.psi(-R - delta) + phi(R + delta))
    return float(max(q.max(), edge))


def lemma4_ensemble(cls: UncertaintyClass, seed: int = 0) -> list[Plant]:
    """Twenty class members: four drift patterns times five input-gain profiles."""
    plants = []
    for drift in ("zero", "outward", "inward", "flip"):
        for j, kind in enumerate(("lower", "upper", "alternating", "random", "random")):
            profile = BProfile(kind, cls.b_lower, cls.b_upper, seed=seed + j)
            name = f"{drift}-{kind}" + (f"{seed + j}" if kind == "random" else "")
            plants.append(EnvelopePlant(cls, drift, profile, name=name))
    return plants


def late_tail(N: int) -> int:
    """Samples simulated past the deadline when checking the prescribed law."""
    return max(16, math.ceil(0.1 * N))


def _member_late(args):
    plant, cls, phi, x0, T, N, eps = args
    sched = uniform(0.0, T, N, tail=late_tail(N))
    traj = simulate(plant, sched, prescribed_controller(cls, phi), x0)
    if traj.overflow:
        return math.inf
    return float(np.abs(traj.xs()[N:]).max())


class Lemma4SelectionError(RuntimeError):
    def __init__(self, msg, plant=None):
        super().__init__(msg)
        self.plant = plant


@dataclass
class Lemma4Selection:
    Delta: float
    Q: float
    N: int
    N_start: int
    halvings: int
    tail: int
    late_max: dict  # plant name -> max |x_k| for k >= N

    @property
    def worst_plant(self) -> str:
        return max(self.late_max, key=self.late_max.get)


def select_delta_report(cls: UncertaintyClass, phi: PhiFunction, M: float, eps: float,
                        T: float, ensemble: Sequence[Plant], x0: Optional[float] = None,
                        workers: int = 1) -> Lemma4Selection:
    """Same search as :func:`select_delta_lemma4`, returning the full record."""
    if not ensemble:
        raise ValueError("ensemble must not be empty")
    if not eps > 0.0 or M < 0.0:
        raise ValueError("need eps > 0 and M >= 0")
    x0 = M if x0 is None else x0
    if abs(x0) > M:
        raise ValueError("|x0| must not exceed M")
    Q = lemma4_q_estimate(cls, phi, M, eps, eps)
    N0 = N = period_count(T, min(eps / Q, T / 8.0))
    floor = T / 2 ** 20
    failing = None
    halvings = 0
    while True:
        if T / N < floor:
            raise Lemma4SelectionError(
                f"period fell below {floor:g} with plant {failing!r} still failing", failing)
        jobs = [(p, cls, phi, x0, T, N, eps) for p in ensemble]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                late = list(pool.map(_member_late, jobs))
        else:
            late = [_member_late(j) for j in jobs]
        failing = next((p.name for p, v in zip(ensemble, late) if not v <= eps), None)
        log.info("Delta=%g N=%d failing=%s", T / N, N, failing)
        if failing is None:
            return Lemma4Selection(T / N, Q, N, N0, halvings, late_tail(N),
                                   {p.name: v for p, v in zip(ensemble, late)})
        N *= 2
        halvings += 1


def select_delta_lemma4(cls: UncertaintyClass, phi: PhiFunction, M: float, eps: float, T: float,
                        ensemble: Sequence[Plant], x0: Optional[float] = None,
                        workers: int = 1) -> tuple[float, float]:
    """Largest tested uniform period for the prescribed law that keeps every
    ensemble run inside ``|x| <= eps`` at all samples from ``T/Delta`` on.

    Starts at ``min(eps/Q, T/8)`` (rounded to an integer number of periods)
    and halves until the whole ensemble passes.  Runs continue a tail of
    ``max(16, N/10)`` samples past the deadline.  Returns ``(Delta, Q)``.
    """
    sel = select_delta_report(cls, phi, M, eps, T, ensemble, x0, workers)
    return sel.Delta, sel.Q
