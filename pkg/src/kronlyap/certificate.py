"""Homogeneous polynomial Lyapunov certificates and their validation.

A certificate at level c is a symmetric matrix G with G >= identity such
that V(x) = y(x)^T G y(x) decreases along every mode, where y is the
degree-c monomial vector.  V is then homogeneous of degree 2c, and because
G is positive definite V is a sum of squares by construction (factor
G = L^T L and read off V = ||L y||^2).

Certificates persist with full provenance: the monomial ordering, the
achieved margins, and the solver settings.  The coefficient matrix alone
would be meaningless without the ordering convention, and validation
recomputes every margin from the system instead of trusting solver output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .hierarchy import LiftedOperators, monomial_dynamics
from .sdp import LmiProblem, SolveReport, SolverOptions, SolveStatus, max_margin, solve
from .tensor_lift import (
    DEFAULT_SIZE_CAP,
    MonomialBasis,
    SwitchedSystem,
    eval_monomials,
    kron_power,
    substitution_matrix,
)

OBJECTIVES = ("feas", "x1", "x2")

FLOOR_TOL = 1e-8
LMI_TOL = 1e-8


class Infeasible(Exception):
    """No certificate exists at the requested level and margin.

    Carries the solver report; report.max_margin_bound is an upper bound on
    the best achievable margin, separating near-feasible from strongly
    infeasible systems.
    """

    def __init__(self, c: int, report: SolveReport):
        self.c = c
        self.report = report
        bound = report.max_margin_bound
        detail = f" (margin bound {bound:.4g})" if bound is not None else ""
        super().__init__(f"no level-{c} certificate at margin {report.margin:.4g}{detail}")


class SolverFailure(RuntimeError):
    """The solver stopped without a feasibility verdict."""

    def __init__(self, c: int, report: SolveReport):
        self.c = c
        self.report = report
        super().__init__(f"level-{c} solve ended with {report.status.value}: {report.message}")


class WrongSystemError(ValueError):
    """Certificate and system content hashes disagree."""


@dataclass(frozen=True)
class Certificate:
    n: int
    c: int
    system_hash: str
    exponents: np.ndarray   # (M, n) monomial ordering the matrix refers to
    gram: np.ndarray        # (M, M) symmetric positive definite coefficient matrix
    objective: str
    margins: dict
    solver: dict

    def __post_init__(self):
        object.__setattr__(self, "exponents", np.asarray(self.exponents, dtype=np.int64))
        G = np.asarray(self.gram, dtype=float)
        object.__setattr__(self, "gram", 0.5 * (G + G.T))

    @property
    def order(self) -> int:
        return 2 * self.c

    @cached_property
    def basis(self) -> MonomialBasis:
        return MonomialBasis.from_exponents(self.n, self.c, self.exponents)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "c": self.c,
            "ordering": self.exponents.tolist(),
            "P": self.gram.tolist(),
            "objective": self.objective,
            "margins": self.margins,
            "solver": self.solver,
            "system_hash": self.system_hash,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Certificate":
        return cls(
            n=int(d["n"]),
            c=int(d["c"]),
            system_hash=str(d["system_hash"]),
            exponents=np.asarray(d["ordering"], dtype=np.int64),
            gram=np.asarray(d["P"], dtype=float),
            objective=str(d["objective"]),
            margins=dict(d["margins"]),
            solver=dict(d["solver"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Certificate":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    failures: tuple[str, ...]
    floor_min_eig: float
    lmi_max_eigs: tuple[float, ...]
    delta: float


def _objective_matrix(kind: str, m: int) -> np.ndarray | None:
    if kind == "feas":
        return None
    C = np.zeros((m, m))
    if kind == "x1":
        C[0, 0] = 1.0      # coefficient of the first monomial squared
    elif kind == "x2":
        C[m - 1, m - 1] = 1.0  # coefficient of the last monomial squared
    else:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {kind!r}")
    return C


def _measured_margins(ops: LiftedOperators, G: np.ndarray, delta: float) -> dict:
    lmi_max = [float(np.linalg.eigvalsh(B.T @ G + G @ B).max()) for B in ops.reduced]
    floor_min = float(np.linalg.eigvalsh(G - np.eye(G.shape[0])).min())
    return {"delta": delta, "floor_min_eig": floor_min, "lmi_max_eigs": lmi_max}


def _spd_power(Q: np.ndarray, p: float) -> np.ndarray:
    w, V = np.linalg.eigh(Q)
    return (V * w**p) @ V.T


def _level_one_normalizer(system: SwitchedSystem) -> np.ndarray | None:
    """Best-margin quadratic solution, geometrically normalized.

    Returns None when the system has no common quadratic certificate; higher
    levels then solve in raw coordinates.
    """
    ops1 = monomial_dynamics(system, 1)
    pre = SolverOptions(max_iters=300, gap_tol=1e-4, trace_bound=1e4)
    rep = max_margin(LmiProblem(constraint_ops=list(ops1.reduced)), pre)
    if rep.status != SolveStatus.FEASIBLE:
        return None
    w = np.linalg.eigvalsh(rep.P)
    return rep.P / np.sqrt(w[0] * w[-1])


# Extra strictness enforced during preconditioned solves, covering the
# round-off of mapping the solution back to the stated monomial basis:
# the floor is inflated by _FLOOR_SAFETY and the margin tripled.
_FLOOR_SAFETY = 1e-3
_MARGIN_SAFETY = 3.0


def _solve_preconditioned(system, ops, objective_matrix, delta, normalizer, options):
    """Solve the level-c LMI in coordinates balanced by the quadratic solution.

    The state substitution x -> sqrt(Q) x makes every mode dissipative, so
    the Kronecker power of the identity (a diagonal matrix of multinomial
    counts) is a known strictly feasible certificate there; it seeds the
    solver.  Floors, margins, trace, and objective transform congruently and
    the result maps back exactly to the requested problem.
    """
    basis = ops.basis
    R = _spd_power(normalizer, 0.5)
    Rinv = _spd_power(normalizer, -0.5)
    conj = SwitchedSystem(n=system.n, modes=tuple(R @ A @ Rinv for A in system.modes))
    conj_ops = monomial_dynamics(conj, ops.c, basis=basis)
    T = substitution_matrix(basis, R)
    Tinv = substitution_matrix(basis, Rinv)
    F = Tinv.T @ Tinv
    counts = basis.col_counts.astype(float)
    root = np.sqrt(counts)
    lam = float(np.linalg.eigvalsh(F / root[:, None] / root[None, :]).max())
    seed = 2.0 * (1.0 + _FLOOR_SAFETY) * lam * np.diag(counts)
    problem = LmiProblem(
        constraint_ops=list(conj_ops.reduced),
        floor=(1.0 + _FLOOR_SAFETY) * F,
        objective=None if objective_matrix is None else T @ objective_matrix @ T.T,
        margin=_MARGIN_SAFETY * delta,
        margin_rhs=F,
        trace_weight=T @ T.T,
        initial=seed,
    )
    report = solve(problem, options)
    if report.P is not None:
        report.P = T.T @ report.P @ T
    return report


def certify(system: SwitchedSystem, c: int, objective: str = "feas",
            options: SolverOptions | None = None,
            margin: float | None = None,
            ops: LiftedOperators | None = None) -> Certificate:
    """Search for a level-c certificate; raises Infeasible when none exists.

    objective "feas" asks for the smallest admissible matrix, "x1" minimizes
    the coefficient on the first monomial squared (x1**2c), "x2" the last
    (xn**2c).  Levels above one are solved in coordinates balanced by the
    quadratic (level-one) solution when one exists; valid high-level
    certificates are intrinsically ill-conditioned and unreachable without
    that normalization.  Margins are recomputed from the system by
    eigensolves before the certificate is emitted, independently of the
    solver's own report.
    """
    if c < 1:
        raise ValueError("need c >= 1")
    if ops is None:
        ops = monomial_dynamics(system, c)
    objective_matrix = _objective_matrix(objective, ops.dim)
    delta = margin if margin is not None else \
        1e-6 * max(np.linalg.norm(B, 2) for B in ops.reduced)

    normalizer = _level_one_normalizer(system) if c > 1 else None
    if normalizer is None:
        problem = LmiProblem(constraint_ops=list(ops.reduced),
                             objective=objective_matrix, margin=delta)
        report = solve(problem, options)
    else:
        report = _solve_preconditioned(system, ops, objective_matrix, delta,
                                       normalizer, options)
    if report.status == SolveStatus.INFEASIBLE:
        raise Infeasible(c, report)
    if report.status != SolveStatus.FEASIBLE:
        raise SolverFailure(c, report)

    G = 0.5 * (report.P + report.P.T)
    margins = _measured_margins(ops, G, delta)
    if margins["floor_min_eig"] < -FLOOR_TOL or any(
        e > -delta + LMI_TOL for e in margins["lmi_max_eigs"]
    ):
        report.status = SolveStatus.NUMERICAL_FAILURE
        report.message = "solver result failed independent margin recheck"
        raise SolverFailure(c, report)

    return Certificate(
        n=system.n,
        c=c,
        system_hash=system.content_hash(),
        exponents=ops.basis.exponents,
        gram=G,
        objective=objective,
        margins=margins,
        solver={
            "status": report.status.value,
            "iterations": report.iterations,
            "runtime": report.runtime,
            "duality_gap": report.duality_gap,
            "objective_value": report.objective_value,
            "gap_tol": (options or SolverOptions()).gap_tol,
            "max_iters": (options or SolverOptions()).max_iters,
        },
    )


def eval_V(cert: Certificate, x) -> float | np.ndarray:
    """V(x) = y(x)^T G y(x); accepts a single point or a batch of rows."""
    y = eval_monomials(cert.basis, x)
    if y.ndim == 1:
        return float(y @ cert.gram @ y)
    return np.einsum("tm,mk,tk->t", y, cert.gram, y)


def eval_Vdot(cert: Certificate, system: SwitchedSystem, x, i: int,
              ops: LiftedOperators | None = None) -> float | np.ndarray:
    """Derivative of V along mode i: y^T (B_i^T G + G B_i) y.

    Strictly negative away from the origin whenever the certificate is valid.
    Pass precomputed operators to avoid rebuilding them in tight loops.
    """
    if cert.system_hash != system.content_hash():
        raise WrongSystemError("certificate was issued for a different system")
    if ops is None:
        ops = monomial_dynamics(system, cert.c, basis=cert.basis)
    B = ops.reduced[i]
    Q = B.T @ cert.gram + cert.gram @ B
    y = eval_monomials(cert.basis, x)
    if y.ndim == 1:
        return float(y @ Q @ y)
    return np.einsum("tm,mk,tk->t", y, Q, y)


def validate(cert: Certificate, system: SwitchedSystem) -> ValidationReport:
    """Recheck a certificate from scratch against the system it references.

    Rebuilds the basis from the stored ordering, recomputes the reduced
    operators, and re-derives every eigenvalue margin.  Raises
    WrongSystemError on a content-hash mismatch.
    """
    if cert.system_hash != system.content_hash():
        raise WrongSystemError("certificate was issued for a different system")
    if cert.n != system.n:
        raise WrongSystemError("state dimension mismatch")
    delta = float(cert.margins["delta"])
    ops = monomial_dynamics(system, cert.c, basis=cert.basis)

    failures = []
    G = cert.gram
    asym = float(np.max(np.abs(G - G.T)))
    if asym > 1e-12:
        failures.append(f"coefficient matrix asymmetry {asym:.3g}")
    floor_min = float(np.linalg.eigvalsh(G - np.eye(G.shape[0])).min())
    if floor_min < -FLOOR_TOL:
        failures.append(f"floor violated: min eig(G - I) = {floor_min:.3g}")
    lmi_max = []
    for i, B in enumerate(ops.reduced):
        top = float(np.linalg.eigvalsh(B.T @ G + G @ B).max())
        lmi_max.append(top)
        if top > -delta + LMI_TOL:
            failures.append(f"mode {i} decrease violated: max eig = {top:.3g} "
                            f"> {-delta + LMI_TOL:.3g}")
    return ValidationReport(
        passed=not failures,
        failures=tuple(failures),
        floor_min_eig=floor_min,
        lmi_max_eigs=tuple(lmi_max),
        delta=delta,
    )


def lift_quadratic(Q, k: int, cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """k-fold Kronecker power of a symmetric matrix; preserves definiteness."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
        raise ValueError("Q must be symmetric")
    return kron_power(Q, k, cap=cap)


def sos_factor(cert: Certificate) -> np.ndarray:
    """Upper-triangular L with gram = L^T L, so V(x) = ||L y(x)||^2.

    Exists for every valid certificate since gram >= identity; it exhibits V
    as an explicit sum of squares of degree-c polynomials.
    """
    return np.linalg.cholesky(cert.gram).T


def _cholesky_upper_longdouble(G: np.ndarray) -> np.ndarray:
    """Extended-precision Cholesky (upper factor); raises on non-PD input."""
    A = G.astype(np.longdouble)
    m = A.shape[0]
    L = np.zeros_like(A)
    for i in range(m):
        for j in range(i + 1):
            s = A[i, j] - L[i, :j] @ L[j, :j]
            if i == j:
                if s <= 0:
                    raise np.linalg.LinAlgError("matrix is not positive definite")
                L[i, j] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L.T


def sos_defect(cert: Certificate, x) -> float:
    """Relative disagreement between V(x) and its sum-of-squares re-evaluation.

    Factors the stored coefficient matrix in extended precision and compares
    ||L y(x)||^2 against y(x)^T G y(x) computed the same way, so the result
    reflects the factorization identity rather than double-rounding: at high
    levels the certificates are ill-conditioned enough that plain double
    evaluation of either side loses more than the identity itself.  Raises
    if the matrix is not positive definite (no witness exists).
    """
    U = _cholesky_upper_longdouble(cert.gram)
    y = eval_monomials(cert.basis, np.asarray(x, dtype=float)).astype(np.longdouble)
    single = y.ndim == 1
    ys = y[None, :] if single else y
    G = cert.gram.astype(np.longdouble)
    direct = np.einsum("tm,mk,tk->t", ys, G, ys)
    squares = ((ys @ U.T) ** 2).sum(axis=1)
    defect = np.abs(squares - direct) / np.where(direct > 0, direct, 1.0)
    out = defect.astype(float)
    return float(out[0]) if single else out
