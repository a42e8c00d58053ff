"""
Rigid-motion content of formation fields near an invariant orbit.

The linear map d_omega0 sends a constant offset field h to the rigid motion it
induces to first order: the part of h(q) lying in the orbit tangent space at a
critical configuration q. The remainder of h(q) is absorbed by a shape change
and lies in the range of the (symmetric) Hessian, orthogonal to that space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotCritical, RankDeficient, SupportViolation
from .formation import CliqueSpec, FormationGraph, Laws, OffsetField, hessian, offset_field, vector_field
from .liegroup import (
    SEAlgebraElement,
    as_configuration,
    config_rank,
    fit_generator,
    se_act,
    se_exp,
    tangent_basis,
    transport_generator,
)
from .sim import settle_run

CRITICAL_TOL = 1e-8
# RK4 leaves an O((h lambda_max)^4) bias in the edge rates of a moving orbit;
# keeping h lambda_max at or below this lets 1e-10 settling criteria be met.
STIFF_STEP = 0.25


def settling_step(graph: FormationGraph, laws: Laws | None, q, base: float = 0.05) -> float:
    """``base`` reduced so that step * (largest Hessian eigenvalue) <= STIFF_STEP."""
    lam = float(np.max(np.abs(np.linalg.eigvalsh(hessian(graph, laws, as_configuration(q))))))
    return min(base, STIFF_STEP / lam) if lam > 0 else base


@dataclass(frozen=True, eq=False)
class RigidFit:
    generator: SEAlgebraElement
    residual: float


def fit_rigid_motion(p, field) -> RigidFit:
    """Closest rigid field (Omega x_i + v)_i to ``field`` in the least-squares sense."""
    gen, resid = fit_generator(p, field)
    return RigidFit(gen, resid)


def eta(h: OffsetField, clique: CliqueSpec) -> np.ndarray:
    """Skew (k+1) x (k+1) matrix with entries (c_ij - c_ji) / 2 over clique positions."""
    allowed = set(clique.directed_edges())
    for e, c in h.values.items():
        if e not in allowed and c != 0.0:
            raise SupportViolation(f"offset on {e} is outside the clique")
    mem = clique.members
    size = len(mem)
    a = np.zeros((size, size))
    for s in range(size):
        for t in range(s + 1, size):
            val = 0.5 * (h[(mem[s], mem[t])] - h[(mem[t], mem[s])])
            a[s, t] = val
            a[t, s] = -val
    return a


def vertical_shift_basis(clique: CliqueSpec) -> list[OffsetField]:
    """[e] for every clique edge e = (i, j): c_ij = 1, c_ji = -1."""
    support = clique.directed_edges()
    return [OffsetField({(i, j): 1.0, (j, i): -1.0}, support) for i, j in clique.edges()]


def _check_critical(graph, laws, q):
    q = as_configuration(q)
    res = float(np.max(np.abs(vector_field(graph, laws, q))))
    if res >= CRITICAL_TOL:
        raise NotCritical(f"|f(q)| = {res:.3e} is not below {CRITICAL_TOL:g}")
    if config_rank(q) < q.shape[1]:
        raise RankDeficient("q must be of full rank")
    return q


def d_omega0(h: OffsetField, graph: FormationGraph, laws: Laws | None, q) -> SEAlgebraElement:
    """First-order rigid motion generated by offsets ``h`` at the critical configuration ``q``."""
    q = _check_critical(graph, laws, q)
    hq = offset_field(graph, q, h).reshape(-1)
    basis = tangent_basis(q)
    proj = basis @ (basis.T @ hq)
    return fit_rigid_motion(q, proj).generator


def d_omega0_matrix(offsets: list[OffsetField], graph: FormationGraph, laws: Laws | None, q) -> np.ndarray:
    """Columns are the se(k) coordinates of d_omega0 applied to each offset field."""
    return np.column_stack([d_omega0(h, graph, laws, q).to_vector() for h in offsets])


def rho_omega_numeric(
    h: OffsetField,
    graph: FormationGraph,
    laws: Laws | None,
    q,
    horizon: float = 500.0,
    tol: float = 1e-9,
    step: float | None = None,
) -> tuple[np.ndarray, RigidFit]:
    """Approximate rho(h) and omega(h) by integrating f + h from q until the shape settles.

    Once settled, p(T) = exp(omega T) . rho(h), so rho(h) is recovered by pulling
    p(T) back along the fitted generator. The generator is invariant under its
    own flow, so the transported fit equals the fit at p(T) up to round-off.
    """
    q = as_configuration(q)
    if step is None:
        step = settling_step(graph, laws, q)
    field = lambda x: vector_field(graph, laws, x, perturbation=h)  # noqa: E731
    # settle an order tighter so the certified fit residual lands below tol
    res = settle_run(field, q, 0.1 * tol, horizon, step=step, graph=graph)
    p_t = res.state
    fit = fit_rigid_motion(p_t, field(p_t))
    back = se_exp(fit.generator, res.time).inverse()
    rho = se_act(back, p_t)
    return rho, RigidFit(transport_generator(fit.generator, back), fit.residual)


def trace_pairing_lhs(g: SEAlgebraElement, h: OffsetField, graph: FormationGraph, q) -> float:
    """<(Omega, v) . q, h(q)> in R^{kn}."""
    q = as_configuration(q)
    return float(np.sum(g.field(q) * offset_field(graph, q, h)))


def trace_pairing_rhs(g: SEAlgebraElement, h: OffsetField, clique: CliqueSpec, q) -> float:
    """Tr(T(Omega, v) X eta(h) X^T) with X having columns (x_i, 1) over the clique."""
    q = as_configuration(q)
    k = q.shape[1]
    x = np.vstack([q[list(clique.members)].T, np.ones(k + 1)])
    t = np.zeros((k + 1, k + 1))
    t[:k, :k] = g.omega
    t[:k, k] = g.vel
    t[k, :k] = -g.vel
    return float(np.trace(t @ x @ eta(h, clique) @ x.T))
