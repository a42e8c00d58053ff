"""Distance-based rigid formations: simulation, orbit stability, clique steering and drift compensation."""

from .errors import *  # noqa: F401,F403
from .formation import (
    CliqueSpec,
    FormationGraph,
    InteractionLaw,
    OffsetField,
    Stability,
    StabilityReport,
    classify_orbit,
    hessian,
    is_infinitesimally_rigid,
    potential,
    rigidity_matrix,
    vector_field,
)
from .liegroup import SEAlgebraElement, SEElement, orbit_distance, se_act, se_compose, se_exp, se_log
from .orbit import d_omega0, d_omega0_matrix, eta, fit_rigid_motion, rho_omega_numeric, vertical_shift_basis
from .robustness import demonstrate_drift, sample_perturbation, single_edge_mismatch, solve_offset
from .sim import Trajectory, integrate, settle
from .steering import execute_steering, plan_steering, steer, verify_epsilon_controllability

__version__ = "0.1.0"
