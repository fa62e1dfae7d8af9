"""Stability certificates for switched linear systems.

Builds homogeneous polynomial Lyapunov functions of degree 2c as quadratic
forms over degree-c monomial coordinates, certifies them by solving the
associated linear matrix inequalities, and analyzes the resulting invariant
sets by boundary tracing and simulation.
"""

from .analysis import (
    SublevelSet,
    area,
    boundary_trace,
    contains,
    intersect_levels,
)
from .certificate import (
    Certificate,
    Infeasible,
    SolverFailure,
    ValidationReport,
    WrongSystemError,
    certify,
    eval_V,
    eval_Vdot,
    lift_quadratic,
    sos_defect,
    sos_factor,
    validate,
)
from .hierarchy import (
    LiftedOperators,
    chain_rule_residual,
    kron_sum,
    monomial_dynamics,
    monomial_dynamics_dense,
)
from .sdp import LmiProblem, SolveReport, SolverOptions, SolveStatus, solve, solve_with_objective
from .simulate import (
    AdversarialPolicy,
    FixedPolicy,
    MonotoneReport,
    PeriodicPolicy,
    RandomPolicy,
    Trajectory,
    adversarial_policy,
    check_monotone,
    integrate,
    integrate_outer,
)
from .tensor_lift import (
    MonomialBasis,
    SizeCapError,
    SwitchedSystem,
    basis_size,
    enumerate_basis,
    eval_monomials,
    kron,
    kron_power,
    monomial_jacobian,
    multinomial,
    selector_recursive_n2,
)

__version__ = "0.1.0"

__all__ = [
    "AdversarialPolicy",
    "Certificate",
    "FixedPolicy",
    "Infeasible",
    "LiftedOperators",
    "LmiProblem",
    "MonomialBasis",
    "MonotoneReport",
    "PeriodicPolicy",
    "RandomPolicy",
    "SizeCapError",
    "SolveReport",
    "SolverFailure",
    "SolverOptions",
    "SolveStatus",
    "SublevelSet",
    "SwitchedSystem",
    "Trajectory",
    "ValidationReport",
    "WrongSystemError",
    "adversarial_policy",
    "area",
    "basis_size",
    "boundary_trace",
    "certify",
    "chain_rule_residual",
    "check_monotone",
    "contains",
    "enumerate_basis",
    "eval_V",
    "eval_Vdot",
    "eval_monomials",
    "integrate",
    "integrate_outer",
    "intersect_levels",
    "kron",
    "kron_power",
    "kron_sum",
    "lift_quadratic",
    "monomial_dynamics",
    "monomial_dynamics_dense",
    "monomial_jacobian",
    "multinomial",
    "selector_recursive_n2",
    "solve",
    "solve_with_objective",
    "sos_defect",
    "sos_factor",
    "validate",
]
