"""
Drift from non-reciprocal edge offsets, and clique offsets that cancel it.

A perturbation h with c_ij != c_ji on some edge turns the formation's rest
orbit into a rigidly moving one. A constant control u on the k(k+1)/2 clique
edges, chosen so that f + h + u vanishes at some p, restores an orbit of
equilibria. The pair (u, p) is found by Newton's method with p restricted to
the affine normal slice q + N(q), N(q) being the orthogonal complement of the
orbit tangent space at q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, SingularJacobian
from .formation import (
    CliqueSpec,
    FormationGraph,
    Laws,
    OffsetField,
    StabilityReport,
    classify_orbit,
    field_jacobian,
    offset_field,
    potential,
    vector_field,
)
from .liegroup import as_configuration, normal_basis
from .orbit import RigidFit, fit_rigid_motion, settling_step, vertical_shift_basis
from .sim import Trajectory, integrate, settle_run

TRUST_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class CompensationResult:
    offset: OffsetField
    coefficients: np.ndarray
    equilibrium: np.ndarray
    residual: float
    stability: StabilityReport
    iterations: int


def sample_perturbation(graph: FormationGraph, magnitude: float, seed: int) -> OffsetField:
    """Independent uniform offsets in [-magnitude, magnitude] on every directed edge."""
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    directed = graph.directed_edges()
    vals = np.random.default_rng(seed).uniform(-magnitude, magnitude, size=len(directed))
    return OffsetField(dict(zip(directed, vals.tolist())), directed)


def single_edge_mismatch(graph: FormationGraph, edge: tuple[int, int], delta: float) -> OffsetField:
    """c_ij = delta, c_ji = -delta on one edge."""
    i, j = edge
    graph.edge_index(i, j)
    return OffsetField({(i, j): delta, (j, i): -delta}, graph.directed_edges())


def demonstrate_drift(
    graph: FormationGraph,
    laws: Laws | None,
    q,
    h: OffsetField,
    tol: float = 1e-9,
    horizon: float = 500.0,
    extra_time: float = 0.0,
    step: float | None = None,
    stride: int = 10,
) -> tuple[RigidFit, Trajectory]:
    """Integrate f + h from q until the shape settles; fit the limiting rigid motion.

    ``extra_time`` continues the run past settling so the steady motion itself
    is part of the returned trajectory. The default step is scaled to the
    stiffness at ``q``.
    """
    q = as_configuration(q)
    if step is None:
        step = settling_step(graph, laws, q)

    def perturbed(x):
        return vector_field(graph, laws, x, perturbation=h)

    pot = (lambda x: potential(graph, laws, x, perturbation=h)) if h.is_reciprocal() else None
    diag = dict(reference=q, potential=pot)
    res = settle_run(perturbed, q, 0.1 * tol, horizon, step=step, graph=graph, stride=stride, record=True, **diag)
    traj = res.trajectory
    if extra_time > 0:
        tail = integrate(perturbed, res.state, extra_time, step=step, stride=stride, **diag)
        traj = Trajectory(
            np.concatenate([traj.times, res.time + tail.times[1:]]),
            np.concatenate([traj.states, tail.states[1:]]),
            np.concatenate([traj.potential, tail.potential[1:]]),
            np.concatenate([traj.orbit_distance, tail.orbit_distance[1:]]),
            np.concatenate([traj.fit_residual, tail.fit_residual[1:]]),
            step,
        )
    final = traj.final
    return fit_rigid_motion(final, perturbed(final)), traj


def solve_offset(
    graph: FormationGraph,
    laws: Laws | None,
    q,
    clique: CliqueSpec,
    h: OffsetField,
    tol: float = 1e-10,
    max_iter: int = 50,
    trust: float | None = None,
) -> CompensationResult:
    """Clique offset u and equilibrium p with f(p) + h(p) + u(p) = 0.

    Unknowns are the k(k+1)/2 basis coefficients of u and the kn - k(k+1)/2
    coordinates of p - q in the normal slice; damped Newton with step halving.
    ``trust`` bounds |h| (default 0.05 * min target length).
    """
    q = as_configuration(q)
    clique.validate(graph, q)
    limit = TRUST_FRACTION * min(graph.target_lengths) if trust is None else trust
    if h.norm() > limit:
        raise NoConvergence(f"|h| = {h.norm():.3g} exceeds the trust region {limit:.3g}")

    basis = vertical_shift_basis(clique)
    normal = normal_basis(q)
    m = len(basis)

    def unpack(z):
        p = q + (normal @ z[m:]).reshape(q.shape)
        u = OffsetField.zeros(clique.directed_edges())
        for c, e in zip(z[:m], basis):
            u = u + e * float(c)
        return u, p

    def residual(z):
        u, p = unpack(z)
        return vector_field(graph, laws, p, perturbation=h, control=u).reshape(-1)

    def jacobian(z):
        u, p = unpack(z)
        cols = [offset_field(graph, p, e).reshape(-1) for e in basis]
        jp = field_jacobian(graph, laws, p, perturbation=h, control=u) @ normal
        return np.column_stack(cols + [jp])

    z = np.zeros(q.size)
    jac0 = jacobian(z)
    if np.linalg.cond(jac0) > 1e12:
        raise SingularJacobian("Newton matrix is singular at the nominal point (degenerate clique or flexible graph?)")

    r = residual(z)
    it = 0
    while np.max(np.abs(r)) >= tol:
        if it == max_iter:
            raise NoConvergence(f"Newton stalled at residual {np.max(np.abs(r)):.3e}")
        delta = np.linalg.solve(jacobian(z), -r)
        lam = 1.0
        while True:
            z_new = z + lam * delta
            r_new = residual(z_new)
            if np.linalg.norm(r_new) < np.linalg.norm(r) or lam < 1e-4:
                break
            lam *= 0.5
        if np.linalg.norm(r_new) >= np.linalg.norm(r):
            raise NoConvergence(f"line search failed at residual {np.max(np.abs(r)):.3e}")
        z, r = z_new, r_new
        it += 1

    u, p = unpack(z)
    stability = classify_orbit(graph, laws, p, perturbation=h, control=u)
    return CompensationResult(u, z[:m].copy(), p, float(np.max(np.abs(r))), stability, it)
