"""Domain types shared across the package.

The system under study is the scalar uncertain plant

    x' = f(x, t) + b(x, t) u

actuated through a zero-order hold.  An :class:`UncertaintyClass` bounds the
admissible ``(f, b)`` pairs, a :class:`Plant` is one concrete (possibly
adversarial) member, and a :class:`Trajectory` records what happened at each
sampling instant.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, NamedTuple, Optional

import numpy as np

from .integrate import IntervalDynamics

OVERFLOW_LIMIT = 1e300
MEMBERSHIP_TOL = 1e-12


def sign(x: float) -> float:
    """Sign with the selection sign(0) = 0."""
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


# -- named drift envelopes ---------------------------------------------------

def psi_zero(x: float) -> float:
    return 0.0


def psi_abs(x: float) -> float:
    return abs(x)


def psi_square(x: float) -> float:
    return x * x


def psi_const(value: float, x: float) -> float:
    return value


def psi_sinabs(x: float) -> float:
    return abs(x * math.sin(x))


class PsiSpec(NamedTuple):
    fn: Callable[[float], float]
    monotone_even: bool
    slope: Optional[float]  # psi(x) == slope*|x| exactly, else None
    name: str


def named_psi(name: str) -> PsiSpec:
    """Look up an envelope by registry name: abs, square, zero, sinabs, const:v."""
    key = name.strip().lower()
    if key == "abs":
        return PsiSpec(psi_abs, True, 1.0, "abs")
    if key == "square":
        return PsiSpec(psi_square, True, None, "square")
    if key == "zero":
        return PsiSpec(psi_zero, True, 0.0, "zero")
    if key == "sinabs":
        return PsiSpec(psi_sinabs, False, None, "sinabs")
    if key.startswith("const:"):
        try:
            value = float(key.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad constant envelope {name!r}") from None
        if not value >= 0.0:
            raise ValueError(f"constant envelope must be nonnegative, got {value}")
        return PsiSpec(partial(psi_const, value), True, 0.0 if value == 0.0 else None,
                       f"const:{value:g}")
    raise ValueError(f"unknown psi {name!r}; expected abs, square, zero, sinabs or const:v")


@dataclass(frozen=True)
class UncertaintyClass:
    """Admissible set ``b_lower <= b <= b_upper``, ``|f(x,t)| <= d_bound * psi(x)``.

    ``b_upper = inf`` encodes an input gain that is only bounded below.
    ``d_bound`` scales the drift envelope; it is 1 for the practical class and
    equals the adversary's ``D`` for the time-varying-drift class.
    """

    b_lower: float
    b_upper: float = math.inf
    psi: Callable[[float], float] = psi_zero
    psi_monotone_even: bool = False
    psi_slope: Optional[float] = None
    d_bound: float = 1.0
    label: str = ""

    def __post_init__(self):
        if not self.b_lower > 0.0:
            raise ValueError(f"b_lower must be positive, got {self.b_lower}")
        if not self.b_upper >= self.b_lower:
            raise ValueError(f"b_upper={self.b_upper} is below b_lower={self.b_lower}")
        if not self.d_bound >= 0.0:
            raise ValueError("d_bound must be nonnegative")

    @classmethod
    def named(cls, psi: str, b_lower: float, b_upper: float = math.inf,
              d_bound: float = 1.0) -> "UncertaintyClass":
        spec = named_psi(psi)
        return cls(b_lower, b_upper, spec.fn, spec.monotone_even, spec.slope, d_bound,
                   spec.name)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.b_upper)

    def envelope(self, x: float) -> float:
        value = self.psi(x)
        if value < 0.0:
            raise ValueError(f"psi({x}) = {value} is negative")
        return value


# -- input-gain profiles -----------------------------------------------------

_BLOCK = 1024


class BProfile:
    """Per-interval input gain ``b_k`` inside ``[b_lower, b_upper]``.

    Kinds: ``lower``, ``upper``, ``alternating`` (lower on even k) and
    ``random``.  Random values come from a Philox stream keyed by the seed,
    with the counter derived from ``k``, so ``b_k`` depends only on
    ``(seed, k)``.
    """

    KINDS = ("lower", "upper", "alternating", "random")

    def __init__(self, kind: str, b_lower: float, b_upper: float, seed: int = 0):
        if kind not in self.KINDS:
            raise ValueError(f"unknown b profile {kind!r}; expected one of {self.KINDS}")
        if not 0.0 < b_lower <= b_upper < math.inf:
            raise ValueError("b profile needs 0 < b_lower <= b_upper < inf")
        self.kind = kind
        self.b_lower = b_lower
        self.b_upper = b_upper
        self.seed = int(seed)
        self._blocks: dict[int, list] = {}

    def _uniform(self, k: int) -> float:
        j, i = divmod(k, _BLOCK)
        block = self._blocks.get(j)
        if block is None:
            # 4 doubles per Philox counter increment
            gen = np.random.Generator(np.random.Philox(key=self.seed, counter=j * (_BLOCK // 4)))
            block = self._blocks[j] = gen.random(_BLOCK).tolist()
        return block[i]

    def __call__(self, k: int) -> float:
        if self.kind == "lower":
            return self.b_lower
        if self.kind == "upper":
            return self.b_upper
        if self.kind == "alternating":
            return self.b_lower if k % 2 == 0 else self.b_upper
        return self.b_lower + (self.b_upper - self.b_lower) * self._uniform(k)

    def __repr__(self):
        extra = f", seed={self.seed}" if self.kind == "random" else ""
        return f"BProfile({self.kind!r}, {self.b_lower}, {self.b_upper}{extra})"

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_blocks"] = {}
        return state


# -- plants ------------------------------------------------------------------

class Plant:
    """A concrete member of an uncertainty class.

    Subclasses implement ``f`` and ``b`` with signature ``(x, t, k, u)``.
    Adversarial subclasses override :meth:`interval` to commit constant data
    for the whole hold interval and store it in ``adversary_state``; the
    ``f``/``b`` evaluators then return the committed values.
    """

    piecewise_constant = False

    def __init__(self, name: str = "plant"):
        self.name = name
        self.adversary_state: dict = {}

    def f(self, x: float, t: float, k: int, u: float) -> float:
        raise NotImplementedError

    def b(self, x: float, t: float, k: int, u: float) -> float:
        raise NotImplementedError

    def reset(self) -> None:
        self.adversary_state.clear()

    def interval(self, k: int, t: float, x: float, u: float, dt: float) -> IntervalDynamics:
        f0 = self.f(x, t, k, u)
        b0 = self.b(x, t, k, u)
        if self.piecewise_constant:
            return IntervalDynamics.affine(0.0, f0 + b0 * u, f0, b0)
        return IntervalDynamics.general(partial(self.f, k=k, u=u), partial(self.b, k=k, u=u),
                                        f0, b0)

    def __repr__(self):
        parts = [repr(self.name)]
        for key, value in sorted(vars(self).items()):
            if key not in ("name", "adversary_state") and not key.startswith("_"):
                parts.append(f"{key}={describe(value)}")
        return f"{type(self).__name__}({', '.join(parts)})"


class FunctionPlant(Plant):
    """Honest plant from callables ``f(x, t)`` and ``b(x, t)``.

    With ``piecewise_constant=True`` the values at ``(x_k, t_k)`` are held
    over the interval, which lets the runner use the exact affine step.
    """

    def __init__(self, f: Callable[[float, float], float], b: Callable[[float, float], float],
                 name: str = "function", piecewise_constant: bool = False):
        super().__init__(name)
        self._f = f
        self._b = b
        self.piecewise_constant = piecewise_constant

    def f(self, x, t, k=0, u=0.0):
        return self._f(x, t)

    def b(self, x, t, k=0, u=0.0):
        return self._b(x, t)


def _const(value, x, t):
    return value


def constant_plant(f: float = 0.0, b: float = 1.0, name: str | None = None) -> FunctionPlant:
    """Plant with constant drift and constant input gain."""
    return FunctionPlant(partial(_const, f), partial(_const, b),
                         name or f"const(f={f:g},b={b:g})", piecewise_constant=True)


# -- controllers -------------------------------------------------------------

@dataclass(frozen=True)
class Controller:
    """Sampled feedback ``u_k = law(x_k, t_k, k)`` held over the interval."""

    law: Callable[[float, float, int], float]
    label: str = "controller"

    def __call__(self, x: float, t: float, k: int) -> float:
        return self.law(x, t, k)


# -- trajectories ------------------------------------------------------------

class StepRecord(NamedTuple):
    k: int
    t: float
    x: float
    u: float
    f: float
    b: float
    crossed: bool = False


class DensePoint(NamedTuple):
    k: int
    t: float
    x: float


@dataclass
class Trajectory:
    """Record of a sampled run.

    ``steps[k]`` holds the state at ``t_k`` and the data held over
    ``[t_k, t_{k+1})``; the state reached at the last instant is kept in
    ``t_end``/``x_end``.
    """

    steps: list = field(default_factory=list)
    t_end: float = 0.0
    x_end: float = 0.0
    dense: list = field(default_factory=list)
    converged_at: Optional[int] = None
    diverged: bool = False
    overflow: bool = False
    truncated: Optional[str] = None
    config_hash: str = ""
    plant_id: str = ""

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def xs(self) -> np.ndarray:
        return np.array([s.x for s in self.steps] + [self.x_end], dtype=float)

    def ts(self) -> np.ndarray:
        return np.array([s.t for s in self.steps] + [self.t_end], dtype=float)

    def state(self, k: int) -> float:
        return self.x_end if k == len(self.steps) else self.steps[k].x


def describe(value) -> str:
    """Stable text form of a parameter: callables by name, never by address."""
    if isinstance(value, partial):
        args = ", ".join(describe(a) for a in value.args)
        return f"{describe(value.func)}({args})"
    if callable(value) and hasattr(value, "__qualname__"):
        return f"{getattr(value, '__module__', '')}.{value.__qualname__}"
    if isinstance(value, UncertaintyClass):
        return (f"UncertaintyClass({value.b_lower!r}, {value.b_upper!r}, {describe(value.psi)}, "
                f"d_bound={value.d_bound!r})")
    return repr(value)


def config_digest(*parts) -> str:
    text = "|".join(describe(p) if not isinstance(p, Plant) else repr(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class MembershipReport:
    passed: bool
    f_ok: list
    b_ok: list
    first_failure: Optional[int] = None

    def __bool__(self):
        return self.passed


def validate_membership(plant: Plant, cls: UncertaintyClass, traj: Trajectory,
                        tol: float = MEMBERSHIP_TOL) -> MembershipReport:
    """Check every recorded ``(f_k, b_k)`` against the class bounds at ``x_k``."""
    if traj.plant_id != plant.name:
        raise ValueError(f"trajectory was produced by {traj.plant_id!r}, not {plant.name!r}")
    f_ok, b_ok = [], []
    first = None
    for s in traj.steps:
        fo = abs(s.f) <= cls.d_bound * cls.envelope(s.x) * (1.0 + tol)
        bo = cls.b_lower * (1.0 - tol) <= s.b <= cls.b_upper * (1.0 + tol)
        f_ok.append(fo)
        b_ok.append(bo)
        if first is None and not (fo and bo):
            first = s.k
    return MembershipReport(first is None, f_ok, b_ok, first)
