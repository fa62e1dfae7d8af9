"""Operator lifts: Kronecker sums and the dynamics of monomial coordinates.

If x follows a linear mode A, the degree-c Kronecker power of x follows the
c-fold Kronecker sum of A, and the reduced vector of distinct monomials
follows a small square matrix acting on monomial coordinates.  The reduced
matrices are what the LMI solver consumes; each one has size equal to the
monomial count rather than n**c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_lift import (
    DEFAULT_SIZE_CAP,
    MonomialBasis,
    SwitchedSystem,
    _checked_tensor_dim,
    enumerate_basis,
    eval_monomials,
    monomial_jacobian,
)


@dataclass(frozen=True)
class LiftedOperators:
    """Per-mode dynamics of the degree-c monomial vector of one system."""

    c: int
    dim: int
    reduced: tuple[np.ndarray, ...]
    basis: MonomialBasis
    system_hash: str


def kron_sum(A, k: int, cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """k-fold Kronecker sum: sum over j of I^(x j) (x) A (x) I^(x k-1-j).

    For k = 1 this is A itself.  For k = 2 it is I (x) A + A (x) I, the
    generator of the matrix flow  d/dt X = A X + X A^T  after vectorizing X.
    In general it governs d/dt of the k-fold Kronecker power of the state.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if k < 1:
        raise ValueError("need k >= 1")
    n = A.shape[0]
    dim = _checked_tensor_dim(n, k, cap)
    out = np.zeros((dim, dim))
    for j in range(k):
        out += np.kron(np.eye(n**j), np.kron(A, np.eye(n ** (k - 1 - j))))
    return out


def monomial_dynamics(system: SwitchedSystem, c: int,
                      basis: MonomialBasis | None = None) -> LiftedOperators:
    """Reduced operators of all modes at level c.

    Column recipe, one monomial at a time: differentiating x**e along
    xdot = A x lowers exponent m (factor e_m) and raises exponent l with
    weight A[m, l], so row j of the operator accumulates e_m * A[m, l] at the
    column of the shifted exponent vector.  This is exact and never touches
    the n**c tensor space; the dense Kronecker route is kept separately as a
    cross-check (monomial_dynamics_dense).
    """
    if basis is None:
        basis = enumerate_basis(system.n, c)
    elif basis.n != system.n or basis.c != c:
        raise ValueError("basis does not match the system dimension and level")
    n, M = system.n, basis.size
    index = basis.index
    mats = []
    for A in system.modes:
        B = np.zeros((M, M))
        for j in range(M):
            e = basis.exponents[j]
            for m in range(n):
                if e[m] == 0:
                    continue
                coeff = float(e[m])
                for l in range(n):
                    if A[m, l] == 0.0:
                        continue
                    f = e.copy()
                    f[m] -= 1
                    f[l] += 1
                    B[j, index[tuple(int(v) for v in f)]] += coeff * A[m, l]
        mats.append(B)
    return LiftedOperators(c=c, dim=M, reduced=tuple(mats), basis=basis,
                           system_hash=system.content_hash())


def monomial_dynamics_dense(system: SwitchedSystem, c: int,
                            basis: MonomialBasis | None = None,
                            cap: int = 2**12) -> list[np.ndarray]:
    """Reduced operators computed literally through the n**c tensor space.

    selector_pinv @ kron_sum(A, c) @ selector for each mode.  Only intended
    as an independent oracle for small n**c; monomial_dynamics is the
    production path.
    """
    if basis is None:
        basis = enumerate_basis(system.n, c, cap=cap)
    S = basis.selector
    Sp = basis.selector_pinv
    return [Sp @ kron_sum(A, c, cap=cap) @ S for A in system.modes]


def chain_rule_residual(ops: LiftedOperators, system: SwitchedSystem,
                        x, i: int) -> float:
    """Relative defect of the monomial dynamics at one state and mode.

    || J(x) @ A_i @ x - B_i @ y(x) || / || y(x) ||, where J is the analytic
    Jacobian of the monomial map.  Zero in exact arithmetic.
    """
    x = np.asarray(x, dtype=float)
    y = eval_monomials(ops.basis, x)
    ynorm = np.linalg.norm(y)
    if ynorm == 0.0:
        raise ValueError("x must be nonzero")
    J = monomial_jacobian(ops.basis, x)
    r = J @ (system.modes[i] @ x) - ops.reduced[i] @ y
    return float(np.linalg.norm(r) / ynorm)
