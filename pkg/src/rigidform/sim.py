"""Fixed-step RK4 integration of formation fields with sampled diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergedState, NoConvergence
from .formation import FormationGraph
from .liegroup import as_configuration, config_rank, fit_generator, orbit_distance

Field = Callable[[np.ndarray], np.ndarray]

DEFAULT_STEP = 0.05


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states with per-sample diagnostics.

    Diagnostic columns hold NaN where they do not apply (no potential for a
    non-reciprocal field, no reference orbit given, rank-deficient state).
    """

    times: np.ndarray
    states: np.ndarray
    potential: np.ndarray
    orbit_distance: np.ndarray
    fit_residual: np.ndarray
    step: float
    refine_change: float = math.nan

    def __len__(self):
        return self.times.size

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.states.shape[1:]


def _rk4_step(field: Field, x: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _march(field, p0, h, n_steps, stride, bound, stop=None, t0=0.0):
    """Integrate up to ``n_steps`` steps; returns sample times, sample states, final time, stopped."""
    x = p0
    times, states = [t0], [x]
    last = 0
    for s in range(n_steps):
        k1 = field(x)
        if stop is not None and stop(x, k1):
            if last != s:
                times.append(t0 + s * h)
                states.append(x)
            return times, states, t0 + s * h, True
        x = _rk4_step(field, x, h, k1)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > bound:
            raise DivergedState(f"state left the bound {bound:g} at t={t0 + (s + 1) * h:g}")
        if (s + 1) % stride == 0:
            times.append(t0 + (s + 1) * h)
            states.append(x)
            last = s + 1
    if last != n_steps:
        times.append(t0 + n_steps * h)
        states.append(x)
    stopped = stop is not None and stop(x, field(x))
    return times, states, t0 + n_steps * h, stopped


def _diagnostics(field, states, reference, potential):
    pot = np.full(len(states), np.nan)
    dist = np.full(len(states), np.nan)
    resid = np.full(len(states), np.nan)
    for s, x in enumerate(states):
        if potential is not None:
            pot[s] = potential(x)
        if reference is not None:
            dist[s] = orbit_distance(x, reference)[0]
        if config_rank(x) == x.shape[1]:
            resid[s] = fit_generator(x, field(x))[1]
    return pot, dist, resid


def _build(field, times, states, h, reference, potential, change=math.nan) -> Trajectory:
    states = np.array(states)
    pot, dist, resid = _diagnostics(field, states, reference, potential)
    return Trajectory(np.array(times), states, pot, dist, resid, h, change)


def integrate(
    field: Field,
    p0,
    duration: float,
    *,
    step: float | None = None,
    initial_step: float = DEFAULT_STEP,
    refine_tol: float = 1e-8,
    max_halvings: int = 8,
    stride: int = 10,
    bound: float = 1e6,
    reference=None,
    potential: Callable[[np.ndarray], float] | None = None,
) -> Trajectory:
    """Integrate ``dp/dt = field(p)`` from ``p0`` over ``duration`` with classic RK4.

    With ``step`` unset the step is halved, starting from ``initial_step``, until
    halving it moves the endpoint by less than ``refine_tol`` (max-norm); the
    finer of the last two runs is returned. Diagnostics are evaluated only on
    the returned samples.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    p0 = as_configuration(p0)
    if reference is not None:
        reference = as_configuration(reference, p0.shape[1])

    def run(h_nominal):
        n_steps = max(1, math.ceil(duration / h_nominal - 1e-9))
        h = duration / n_steps
        times, states, _, _ = _march(field, p0, h, n_steps, stride, bound)
        return h, times, states

    if step is not None:
        h, times, states = run(step)
        return _build(field, times, states, h, reference, potential)

    h, times, states = run(initial_step)
    change = math.inf
    for _ in range(max_halvings):
        h2, times2, states2 = run(h / 2.0)
        change = float(np.max(np.abs(states2[-1] - states[-1])))
        h, times, states = h2, times2, states2
        if change < refine_tol:
            break
    return _build(field, times, states, h, reference, potential, change)


def edge_rates(graph: FormationGraph, p: np.ndarray, velocity: np.ndarray) -> np.ndarray:
    """d/dt ||x_j - x_i|| for every edge."""
    diff = p[graph.heads] - p[graph.tails]
    dv = velocity[graph.heads] - velocity[graph.tails]
    r = np.linalg.norm(diff, axis=1)
    return np.einsum("ij,ij->i", diff, dv) / np.where(r > 0, r, 1.0)


@dataclass(frozen=True, eq=False)
class SettleResult:
    state: np.ndarray
    time: float
    trajectory: Trajectory | None


def settle_run(
    field: Field,
    p0,
    tol: float = 1e-9,
    max_duration: float = 500.0,
    *,
    step: float = DEFAULT_STEP,
    graph: FormationGraph | None = None,
    stride: int = 10,
    bound: float = 1e6,
    record: bool = False,
    reference=None,
    potential: Callable[[np.ndarray], float] | None = None,
) -> SettleResult:
    """Integrate until the field or (given ``graph``) every edge-length rate is below ``tol``.

    Rigid motions keep all edge lengths constant, so the edge criterion also
    detects convergence onto a drifting invariant orbit.
    """
    p0 = as_configuration(p0)

    def stop(x, fx):
        if np.max(np.abs(fx)) < tol:
            return True
        return graph is not None and np.max(np.abs(edge_rates(graph, x, fx))) < tol

    n_steps = max(1, math.ceil(max_duration / step))
    times, states, t_end, stopped = _march(field, p0, step, n_steps, stride, bound, stop)
    if not stopped:
        raise NoConvergence(f"no settling within t={max_duration:g} (tol {tol:g})")
    traj = _build(field, times, states, step, reference, potential) if record else None
    return SettleResult(states[-1], t_end, traj)


def settle(field: Field, p0, tol: float = 1e-9, max_duration: float = 500.0, **kwargs) -> np.ndarray:
    """Final state of :func:`settle_run`."""
    return settle_run(field, p0, tol, max_duration, **kwargs).state
