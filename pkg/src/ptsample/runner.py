"""Closed-loop simulation under zero-order hold, and scenario runs."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .integrate import (AFFINE, DEFAULT_TOL, N_DENSE, affine_dense, step_affine,
                        step_general)
from .model import (OVERFLOW_LIMIT, Controller, DensePoint, Plant, StepRecord, Trajectory,
                    config_digest)
from .schedules import STATE_DEPENDENT, SamplingSchedule


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimOptions:
    eps: float | None = None
    tol: float = DEFAULT_TOL
    dense: bool = False
    n_dense: int = N_DENSE
    max_steps: int | None = None
    overflow_limit: float = OVERFLOW_LIMIT


def _intervals(schedule: SamplingSchedule, xs, max_steps):
    """Iterate ``(k, t_k, dt_k, t_{k+1})``; ``xs`` is read lazily for state-dependent rules."""
    if schedule.kind == STATE_DEPENDENT:
        return _state_intervals(schedule, xs, max_steps)
    inst = schedule.instants
    n = len(schedule.deltas) if max_steps is None else min(max_steps, len(schedule.deltas))
    return zip(range(n), inst[:n], schedule.deltas[:n], inst[1:n + 1])


def _state_intervals(schedule, xs, max_steps):
    ts = [schedule.t0]
    k = 0
    while max_steps is None or k < max_steps:
        t_next = schedule.rule(xs, ts)
        if t_next is None:
            return
        if not t_next > ts[-1]:
            raise SimulationError(f"schedule rule returned non-increasing instant at step {k}")
        yield k, ts[-1], t_next - ts[-1], t_next
        ts.append(t_next)
        k += 1


def simulate(plant: Plant, schedule: SamplingSchedule, controller: Controller, x0: float,
             opts: SimOptions | None = None, **kw) -> Trajectory:
    """Run the sampled loop ``u_k = controller(x_k, t_k, k)`` held over each interval.

    Plants that commit piecewise-affine interval dynamics are advanced with
    the exact exponential step; others with the adaptive integrator.
    Overflow past ``opts.overflow_limit`` ends the run with the
    ``overflow``/``diverged`` flags set.  A NaN from the plant or controller
    is a hard error.
    """
    opts = opts or SimOptions(**kw)
    if not math.isfinite(x0):
        raise ValueError(f"x0 must be finite, got {x0!r}")
    plant.reset()
    traj = Trajectory(plant_id=plant.name,
                      config_hash=config_digest(plant, schedule.describe(), controller.label,
                                                x0, opts))
    eps = opts.eps
    limit = opts.overflow_limit
    steps = traj.steps
    dense = traj.dense if opts.dense else None
    xs = [x0]
    x = x0
    t_end = schedule.t0
    if eps is not None and abs(x0) <= eps:
        traj.converged_at = 0
    law = controller.law
    interval = plant.interval
    new = tuple.__new__  # StepRecord without the keyword-handling constructor
    for k, t, dt, t_next in _intervals(schedule, xs, opts.max_steps):
        u = law(x, t, k)
        if u != u:
            raise SimulationError(f"controller returned NaN at step {k}")
        dyn = interval(k, t, x, u, dt)
        if dyn.mode == AFFINE:
            x_next = step_affine(x, dyn.alpha, dyn.beta, dt)
            cross = x != 0.0 and x * x_next <= 0.0
            if dense is not None:
                dense.extend(DensePoint(k, t + s, v)
                             for s, v in affine_dense(x, dyn.alpha, dyn.beta, dt, opts.n_dense))
        else:
            res = step_general(x, dyn, u, dt, opts.tol, t0=t, n_dense=opts.n_dense)
            x_next, cross = res.x, res.crossed_zero
            if dense is not None:
                dense.extend(DensePoint(k, t + s, v) for s, v in res.dense)
        if x_next != x_next or dyn.f0 != dyn.f0 or dyn.b0 != dyn.b0:
            raise SimulationError(f"plant produced NaN at step {k}")
        steps.append(new(StepRecord, (k, t, x, u, dyn.f0, dyn.b0, cross)))
        xs.append(x_next)
        x = x_next
        t_end = t_next
        if not abs(x) <= limit:
            traj.overflow = traj.diverged = True
            break
        if eps is not None and traj.converged_at is None and abs(x) <= eps:
            traj.converged_at = k + 1
    traj.t_end = t_end
    traj.x_end = x
    if not traj.overflow and schedule.truncation is not None:
        traj.truncated = schedule.truncation
    return traj
