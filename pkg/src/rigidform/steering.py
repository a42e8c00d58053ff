"""
Steering a rigid formation along its orbit with constant clique offsets.

To move q to target . q, write target = exp(Omega, v) and ask the clique for
offsets h_r whose induced rigid motion is r (Omega, v). Holding h_r for time
1/r carries the formation close to target . q; switching it off lets the
nominal gradient flow settle back onto the orbit of target configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, SingularLinearization
from .formation import CliqueSpec, FormationGraph, Laws, OffsetField, potential, vector_field
from .liegroup import SEAlgebraElement, SEElement, as_configuration, se_act, se_exp, se_log
from .orbit import _check_critical, d_omega0_matrix, rho_omega_numeric, vertical_shift_basis
from .sim import Trajectory, integrate, settle_run

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class SteeringPlan:
    offsets: OffsetField
    coefficients: np.ndarray
    rate: float
    duration: float
    target_generator: SEAlgebraElement
    target_element: SEElement
    clique: CliqueSpec


@dataclass(frozen=True, eq=False)
class SteeringOutcome:
    trajectory: Trajectory
    max_orbit_distance: float
    endpoint_error: float
    settled_error: float
    settled_state: np.ndarray
    target_state: np.ndarray
    surrogate_distance: np.ndarray
    settle_max_orbit_distance: float
    settle_time: float
    plan: SteeringPlan = field(repr=False)


def _combine(basis: list[OffsetField], coef: np.ndarray, clique: CliqueSpec) -> OffsetField:
    total = OffsetField.zeros(clique.directed_edges())
    for c, e in zip(coef, basis):
        total = total + e * float(c)
    return total


def plan_steering(
    graph: FormationGraph,
    laws: Laws | None,
    q,
    clique: CliqueSpec,
    target: SEElement,
    rate: float,
    refine: bool = False,
    refine_tol: float = 1e-7,
    max_iter: int = 20,
) -> SteeringPlan:
    """Clique offsets that move the formation by ``target`` in time 1/``rate``.

    The first-order plan solves d_omega0_matrix @ c = rate * coords(log target).
    With ``refine`` the coefficients are corrected by damped chord-Newton steps
    on the numerically evaluated omega map.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    q = _check_critical(graph, laws, q)
    clique.validate(graph, q)
    gen = se_log(target)
    basis = vertical_shift_basis(clique)
    mat = d_omega0_matrix(basis, graph, laws, q)
    if np.linalg.cond(mat) > MAX_CONDITION:
        raise SingularLinearization("d_omega0 is singular on the clique basis (degenerate clique?)")
    goal = rate * gen.to_vector()
    coef = np.linalg.solve(mat, goal)

    if refine and np.any(goal):
        def miss(c):
            _, fit = rho_omega_numeric(_combine(basis, c, clique), graph, laws, q)
            return fit.generator.to_vector() - goal

        err = miss(coef)
        for _ in range(max_iter):
            if np.linalg.norm(err) < refine_tol:
                break
            delta = np.linalg.solve(mat, err)
            lam = 1.0
            while lam > 1e-3:
                trial = coef - lam * delta
                trial_err = miss(trial)
                if np.linalg.norm(trial_err) < np.linalg.norm(err):
                    break
                lam *= 0.5
            else:
                raise NoConvergence("refinement line search failed")
            coef, err = trial, trial_err
        else:
            if np.linalg.norm(err) >= refine_tol:
                raise NoConvergence(f"refinement stopped at |error| = {np.linalg.norm(err):.3e}")

    return SteeringPlan(
        offsets=_combine(basis, coef, clique),
        coefficients=coef,
        rate=float(rate),
        duration=1.0 / rate,
        target_generator=gen,
        target_element=target,
        clique=clique,
    )


def execute_steering(
    graph: FormationGraph,
    laws: Laws | None,
    q,
    plan: SteeringPlan,
    *,
    step: float | None = None,
    stride: int = 10,
    settle_tol: float = 1e-9,
    settle_horizon: float = 500.0,
) -> SteeringOutcome:
    """Hold ``plan.offsets`` for ``plan.duration``, then release and settle."""
    q = as_configuration(q)
    target_state = se_act(plan.target_element, q)

    def controlled(x):
        return vector_field(graph, laws, x, control=plan.offsets)

    pot = (lambda x: potential(graph, laws, x, perturbation=plan.offsets)) if plan.offsets.is_reciprocal() else None
    traj = integrate(controlled, q, plan.duration, step=step, stride=stride, reference=q, potential=pot)
    ideal = plan.target_generator * plan.rate
    surrogate = np.array(
        [np.linalg.norm(x - se_act(se_exp(ideal, t), q)) for t, x in zip(traj.times, traj.states)]
    )
    p_end = traj.final
    settled = settle_run(
        lambda x: vector_field(graph, laws, x),
        p_end,
        settle_tol,
        settle_horizon,
        stride=stride,
        record=True,
        reference=q,
        potential=lambda x: potential(graph, laws, x),
    )
    return SteeringOutcome(
        trajectory=traj,
        max_orbit_distance=float(np.max(traj.orbit_distance)),
        endpoint_error=float(np.linalg.norm(p_end - target_state)),
        settled_error=float(np.linalg.norm(settled.state - target_state)),
        settled_state=settled.state,
        target_state=target_state,
        surrogate_distance=surrogate,
        settle_max_orbit_distance=float(np.max(settled.trajectory.orbit_distance)),
        settle_time=settled.time,
        plan=plan,
    )


@dataclass(frozen=True)
class ControllabilityReport:
    epsilon: float
    passed: bool
    orbit_margin: float
    endpoint_margin: float
    settled_margin: float
    settle_orbit_margin: float


def verify_epsilon_controllability(outcome: SteeringOutcome, epsilon: float) -> tuple[bool, ControllabilityReport]:
    """True iff the run stayed within ``epsilon`` of the orbit and ended within ``epsilon`` of the target.

    Margins are epsilon minus the measured quantity; the settled and
    settling-phase margins are reported but do not enter the verdict.
    """
    ok = outcome.max_orbit_distance < epsilon and outcome.endpoint_error < epsilon
    report = ControllabilityReport(
        epsilon=float(epsilon),
        passed=bool(ok),
        orbit_margin=epsilon - outcome.max_orbit_distance,
        endpoint_margin=epsilon - outcome.endpoint_error,
        settled_margin=epsilon - outcome.settled_error,
        settle_orbit_margin=epsilon - outcome.settle_max_orbit_distance,
    )
    return bool(ok), report


def steer(
    graph: FormationGraph,
    laws: Laws | None,
    q,
    clique: CliqueSpec,
    target: SEElement,
    epsilon: float,
    rate: float | None = None,
    max_halvings: int = 8,
    refine: bool = False,
    **execute_kwargs,
) -> tuple[SteeringOutcome, ControllabilityReport]:
    """Plan and execute, halving the rate until the run is epsilon-controlled.

    The default starting rate is 0.1 / |log target|.
    """
    if rate is None:
        size = se_log(target).norm()
        rate = 0.1 / size if size > 0 else 1.0
    for _ in range(max_halvings + 1):
        plan = plan_steering(graph, laws, q, clique, target, rate, refine=refine)
        outcome = execute_steering(graph, laws, q, plan, **execute_kwargs)
        ok, report = verify_epsilon_controllability(outcome, epsilon)
        if ok:
            return outcome, report
        rate *= 0.5
    return outcome, report
