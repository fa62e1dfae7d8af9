"""Dense LMI feasibility and optimization via a log-barrier interior-point method.

Problems have one symmetric matrix variable P and the shape

    minimize    <C, P>                         (optional linear objective)
    subject to  P - F              >= 0        (floor, default identity)
                B_i^T P + P B_i   <= -delta E  for every constraint matrix B_i
                <W, P>            <= rho       (weighted trace box)

E and W default to the identity; general positive definite E, W, F let a
caller restate the same LMI in better-conditioned coordinates (congruence by
a change of basis turns identity floors into matrix ones) without touching
the solver.  The trace box keeps every barrier subproblem bounded below: the
LMIs are positively homogeneous in P, so without it the central path runs
off to infinity.

Two stages:

* Stage one maximizes the margin t subject to B_i^T P + P B_i <= -t E and
  P >= F.  It terminates with a strictly feasible P for the requested delta,
  or with an upper bound on the best achievable margin (the infeasibility
  diagnostic).  A caller-supplied starting point that is already strictly
  feasible short-circuits the stage.
* Stage two follows the central path of the objective problem from that P
  with Newton steps on the matrix variable and backtracking line search.
  Pure feasibility problems run stage two on the weighted trace, so the
  reported P is the smallest admissible certificate, a canonical
  deterministic choice.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SolveStatus(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 400        # Newton step budget across both stages
    gap_tol: float = 1e-6       # relative duality-gap target
    inner_tol: float = 1e-9     # squared Newton decrement for centering
    trace_bound: float = 1e12   # rho
    mu_init: float = 1.0
    mu_factor: float = 10.0


@dataclass
class LmiProblem:
    """Constraint data for one solve.

    margin None means delta = 1e-6 * max_i ||B_i||_2 (scale-free strictness).
    objective None (or a zero matrix) requests pure feasibility.  initial is
    an optional interior-point hint; it is used only if strictly feasible.
    """

    constraint_ops: list
    floor: np.ndarray | None = None
    objective: np.ndarray | None = None
    margin: float | None = None
    margin_rhs: np.ndarray | None = None
    trace_weight: np.ndarray | None = None
    initial: np.ndarray | None = None

    def __post_init__(self):
        ops = [np.asarray(B, dtype=float) for B in self.constraint_ops]
        if not ops:
            raise ValueError("need at least one constraint matrix")
        m = ops[0].shape[0]
        for B in ops:
            if B.shape != (m, m) or not np.all(np.isfinite(B)):
                raise ValueError("constraint matrices must be square, equal-size, finite")
        self.constraint_ops = ops
        for name in ("floor", "objective", "margin_rhs", "trace_weight", "initial"):
            val = getattr(self, name)
            if val is None:
                continue
            val = np.asarray(val, dtype=float)
            if val.shape != (m, m) or not np.allclose(val, val.T, atol=1e-10):
                raise ValueError(f"{name} must be a symmetric matrix of size {m}")
            setattr(self, name, 0.5 * (val + val.T))
        if self.margin is not None and (self.margin < 0 or not np.isfinite(self.margin)):
            raise ValueError("margin must be nonnegative and finite")

    @property
    def dim(self) -> int:
        return self.constraint_ops[0].shape[0]

    def resolved_margin(self) -> float:
        if self.margin is not None:
            return float(self.margin)
        scale = max(np.linalg.norm(B, 2) for B in self.constraint_ops)
        return 1e-6 * scale


@dataclass
class SolveReport:
    status: SolveStatus
    P: np.ndarray | None
    iterations: int
    runtime: float
    margin: float
    floor_min_eig: float | None = None
    lmi_max_eigs: list[float] = field(default_factory=list)
    objective_value: float | None = None
    duality_gap: float | None = None
    max_margin_bound: float | None = None
    message: str = ""


class _BudgetExhausted(Exception):
    pass


class _LineSearchStall(Exception):
    pass


# Squared Newton decrement target while climbing the barrier ladder; path
# following only needs rough centering between weight increases.  The tight
# options.inner_tol is reserved for the final polish.
_COARSE_TOL = 1e-5


def _sym_basis_stack(m: int) -> np.ndarray:
    """Orthonormal basis of symmetric m x m matrices, diagonal entries first."""
    dim = m * (m + 1) // 2
    stack = np.zeros((dim, m, m))
    k = 0
    for i in range(m):
        stack[k, i, i] = 1.0
        k += 1
    r = 1.0 / np.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            stack[k, i, j] = r
            stack[k, j, i] = r
            k += 1
    return stack


def _svec(stack: np.ndarray, X: np.ndarray) -> np.ndarray:
    return np.einsum("kab,ab->k", stack, X)


def _smat(stack: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("kab,k->ab", stack, u)


class _Block:
    """One log-det barrier term  -log det(A0 + sum_k u_k A_k)."""

    def __init__(self, A0: np.ndarray, lin: np.ndarray):
        self.A0 = A0
        self.lin = lin  # (D, m, m)

    def value(self, u: np.ndarray) -> np.ndarray:
        S = self.A0 + np.einsum("kab,k->ab", self.lin, u)
        return 0.5 * (S + S.T)


def _neg_logdet(S: np.ndarray) -> float:
    """-log det S via Cholesky; raises LinAlgError outside the PD cone."""
    L = np.linalg.cholesky(S)
    return -2.0 * float(np.sum(np.log(np.diag(L))))


def _barrier_value(blocks, u, mu, c_lin) -> float:
    val = mu * float(c_lin @ u)
    for blk in blocks:
        val += _neg_logdet(blk.value(u))
    return val


def _grad_hess(blocks, u, mu, c_lin):
    D = u.shape[0]
    g = mu * c_lin.copy()
    H = np.zeros((D, D))
    for blk in blocks:
        S = blk.value(u)
        Sinv = np.linalg.inv(S)
        Sinv = 0.5 * (Sinv + Sinv.T)
        g -= np.einsum("ab,kba->k", Sinv, blk.lin)
        T = np.einsum("ab,kbc->kac", Sinv, blk.lin)
        H += np.einsum("kab,lba->kl", T, T)
    return g, 0.5 * (H + H.T)


class _Newton:
    """Damped Newton centering with a shared step budget."""

    # A point with squared decrement below this is close enough to the
    # central path that a stalled line search is roundoff, not failure.
    # Path following tolerates decrements up to ~0.25; validity of the final
    # matrix is established downstream by independent eigenvalue rechecks.
    STALL_OK = 1e-2

    def __init__(self, budget: int):
        self.budget = budget
        self.steps = 0

    def center(self, blocks, c_lin, u, mu, tol, step_cap=None):
        """Drive the squared Newton decrement below tol; returns (u, dec2).

        Near the center, rounding can floor the decrement above tol; runs of
        barely-shrinking steps in that regime end the centering instead of
        crawling, provided the point already counts as centered (STALL_OK).
        """
        local = 0
        stagnant = 0
        prev = np.inf
        while True:
            g, H = _grad_hess(blocks, u, mu, c_lin)
            d = self._solve_step(H, g)
            dec2 = max(0.0, float(-(g @ d)))
            if dec2 <= tol:
                return u, dec2
            if step_cap is not None and local >= step_cap:
                return u, dec2
            stagnant = stagnant + 1 if (dec2 <= 1e-2 and dec2 > 0.9 * prev) else 0
            if stagnant >= 5:
                if dec2 <= self.STALL_OK:
                    return u, dec2
                raise _LineSearchStall("Newton decrement stagnated away from the center")
            prev = dec2
            if self.steps >= self.budget:
                raise _BudgetExhausted
            try:
                u = self._line_search(blocks, c_lin, u, mu, g, d)
            except _LineSearchStall:
                if dec2 <= self.STALL_OK:
                    return u, dec2
                raise
            self.steps += 1
            local += 1

    @staticmethod
    def _solve_step(H, g):
        # Jacobi equilibration plus one round of iterative refinement keep
        # the step usable when the barrier Hessian is badly conditioned.
        s = 1.0 / np.sqrt(np.clip(np.diag(H), 1e-300, None))
        Hs = H * s[:, None] * s[None, :]
        gs = g * s
        jitter = 0.0
        for _ in range(6):
            try:
                L = np.linalg.cholesky(Hs + jitter * np.eye(Hs.shape[0]))
            except np.linalg.LinAlgError:
                jitter = max(10.0 * jitter, 1e-14 * (1.0 + float(np.trace(Hs))))
                continue
            def chol_solve(rhs):
                return np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            y = chol_solve(-gs)
            y += chol_solve(-gs - Hs @ y)
            return s * y
        raise _LineSearchStall("Newton system lost positive definiteness")

    @staticmethod
    def _line_search(blocks, c_lin, u, mu, g, d):
        psi0 = _barrier_value(blocks, u, mu, c_lin)
        slope = float(g @ d)
        alpha = 1.0
        while alpha >= 1e-13:
            trial = u + alpha * d
            try:
                psi1 = _barrier_value(blocks, trial, mu, c_lin)
            except np.linalg.LinAlgError:
                alpha *= 0.5
                continue
            if psi1 <= psi0 + 0.01 * alpha * slope:
                return trial
            alpha *= 0.5
        raise _LineSearchStall("line search stalled")


class _Geometry:
    """Shared problem data: barrier blocks and margin measurements."""

    def __init__(self, problem: LmiProblem, opts: SolverOptions):
        m = problem.dim
        self.m = m
        self.ops = problem.constraint_ops
        self.floor = problem.floor if problem.floor is not None else np.eye(m)
        self.E = problem.margin_rhs if problem.margin_rhs is not None else np.eye(m)
        self.W = problem.trace_weight if problem.trace_weight is not None else np.eye(m)
        self.rho = opts.trace_bound
        self.stack = _sym_basis_stack(m)
        self.dim = self.stack.shape[0]
        self.E_chol = np.linalg.cholesky(self.E)

    def margin_of(self, P: np.ndarray) -> float:
        """min_i of -lambda_max(B_i^T P + P B_i, E), generalized to the E metric."""
        worst = np.inf
        L = self.E_chol
        for B in self.ops:
            S = B.T @ P + P @ B
            Y = np.linalg.solve(L, S)
            M = np.linalg.solve(L, Y.T)
            worst = min(worst, -float(np.linalg.eigvalsh(0.5 * (M + M.T)).max()))
        return worst

    def strictly_feasible(self, P: np.ndarray, delta: float, slack: float) -> bool:
        if float(np.linalg.eigvalsh(P - self.floor).min()) <= 0.0:
            return False
        if float(np.sum(self.W * P)) >= self.rho:
            return False
        return self.margin_of(P) > delta + slack

    def blocks(self, delta: float, with_margin_var: bool) -> list:
        """Barrier blocks; with_margin_var adds the margin coordinate t."""
        m, dim = self.m, self.dim
        D = dim + (1 if with_margin_var else 0)

        def pad(lin_p, extra=None):
            lin = np.zeros((D,) + lin_p.shape[1:])
            lin[:dim] = lin_p
            if extra is not None:
                lin[dim] = extra
            return lin

        out = []
        # floor: P - F > 0
        out.append(_Block(-self.floor, pad(self.stack)))
        # modes: -(B^T P + P B) - delta E - t E > 0
        for B in self.ops:
            lin_p = -(np.einsum("ba,kbc->kac", B, self.stack)
                      + np.einsum("kab,bc->kac", self.stack, B))
            extra = -self.E if with_margin_var else None
            out.append(_Block(-delta * self.E, pad(lin_p, extra)))
        # trace box: rho - <W, P> > 0
        tr_lin = -np.einsum("ab,kab->k", self.W, self.stack).reshape(-1, 1, 1)
        out.append(_Block(np.array([[self.rho]]), pad(tr_lin)))
        if with_margin_var:
            # margin cap: t_cap - t > 0; A0 filled in by the caller
            lin = np.zeros((D, 1, 1))
            lin[dim, 0, 0] = -1.0
            out.append(_Block(np.array([[0.0]]), lin))
        return out


def solve(problem: LmiProblem, options: SolverOptions | None = None) -> SolveReport:
    """Solve the LMI system; deterministic given identical inputs and options."""
    t_start = time.perf_counter()
    opts = options or SolverOptions()
    geo = _Geometry(problem, opts)
    delta = problem.resolved_margin()
    newton = _Newton(opts.max_iters)
    C = problem.objective
    has_objective = C is not None and bool(np.any(C))

    def finish(status, P, message="", **extra):
        rep = SolveReport(
            status=status,
            P=P,
            iterations=newton.steps,
            runtime=time.perf_counter() - t_start,
            margin=delta,
            message=message,
            **extra,
        )
        if P is not None:
            rep.floor_min_eig = float(np.linalg.eigvalsh(P - geo.floor).min())
            rep.lmi_max_eigs = [float(np.linalg.eigvalsh(B.T @ P + P @ B).max())
                                for B in geo.ops]
            if has_objective:
                rep.objective_value = float(np.sum(C * P))
        return rep

    try:
        P1, margin_bound, feasible = _stage_one(geo, delta, opts, newton,
                                                problem.initial, stop_early=True)
    except _BudgetExhausted:
        return finish(SolveStatus.MAX_ITERATIONS, None,
                      message="Newton budget exhausted during margin search")
    except (_LineSearchStall, np.linalg.LinAlgError) as exc:
        return finish(SolveStatus.NUMERICAL_FAILURE, None, message=str(exc))

    if not feasible:
        return finish(SolveStatus.INFEASIBLE, None,
                      message=f"best achievable margin is at most {margin_bound:.6g}, "
                              f"below the requested {delta:.6g}",
                      max_margin_bound=margin_bound)

    # Stage two minimizes the caller's objective, or the weighted trace when
    # none was given, so feasibility answers are small canonical certificates.
    target = C if has_objective else geo.W
    try:
        P2, gap = _stage_two(geo, delta, target, opts, newton, P1)
    except _BudgetExhausted:
        return finish(SolveStatus.MAX_ITERATIONS, None,
                      message="Newton budget exhausted on the objective path")
    except (_LineSearchStall, np.linalg.LinAlgError) as exc:
        return finish(SolveStatus.NUMERICAL_FAILURE, None, message=str(exc))
    return finish(SolveStatus.FEASIBLE, P2, duality_gap=gap,
                  max_margin_bound=margin_bound)


def solve_with_objective(problem: LmiProblem, options: SolverOptions | None = None) -> SolveReport:
    """solve() for problems that carry an objective."""
    if problem.objective is None:
        raise ValueError("problem has no objective; use solve()")
    return solve(problem, options)


def max_margin(problem: LmiProblem, options: SolverOptions | None = None) -> SolveReport:
    """Run only the margin-maximization stage to convergence.

    The returned P attains (nearly) the best achievable strict-negativity
    margin within the trace box; status is feasible iff that margin exceeds
    the problem's delta.  Useful for separating near-feasible systems from
    strongly infeasible ones.
    """
    t_start = time.perf_counter()
    opts = options or SolverOptions()
    geo = _Geometry(problem, opts)
    delta = problem.resolved_margin()
    newton = _Newton(opts.max_iters)
    try:
        P, bound, feasible = _stage_one(geo, delta, opts, newton, None, stop_early=False)
    except _BudgetExhausted:
        P, bound, feasible = None, None, False
        status = SolveStatus.MAX_ITERATIONS
    except (_LineSearchStall, np.linalg.LinAlgError):
        P, bound, feasible = None, None, False
        status = SolveStatus.NUMERICAL_FAILURE
    else:
        status = SolveStatus.FEASIBLE if feasible else SolveStatus.INFEASIBLE
    rep = SolveReport(status=status, P=P if feasible else None,
                      iterations=newton.steps, runtime=time.perf_counter() - t_start,
                      margin=delta, max_margin_bound=bound)
    if rep.P is not None:
        rep.floor_min_eig = float(np.linalg.eigvalsh(rep.P - geo.floor).min())
        rep.lmi_max_eigs = [float(np.linalg.eigvalsh(B.T @ rep.P + rep.P @ B).max())
                            for B in geo.ops]
    return rep


def _stage_one(geo, delta, opts, newton, initial, stop_early):
    """Find a strictly feasible P or bound the achievable margin from above.

    Returns (P, margin_bound, feasible_for_delta); margin_bound is None when
    the search stopped before producing a certified bound.
    """
    if stop_early:
        headroom = 0.01 * max(1.0, abs(delta))
        if initial is not None and geo.strictly_feasible(initial, delta, headroom):
            return initial, None, True
    P0 = geo.floor + np.eye(geo.m)
    if float(np.sum(geo.W * P0)) >= geo.rho:
        raise _LineSearchStall("trace bound too small for the interior start")
    raw_t0 = geo.margin_of(P0)
    headroom = 0.02 * max(1.0, abs(raw_t0))
    if stop_early and raw_t0 > delta + headroom:
        return P0, None, True

    dim = geo.dim
    t_cap = delta + 1.0 + 2.0 * abs(raw_t0)
    t0 = min(raw_t0 - max(1.0, 0.05 * abs(raw_t0)), t_cap - 1.0)
    blocks = geo.blocks(0.0, with_margin_var=True)
    blocks[-1].A0 = np.array([[t_cap]])
    c_lin = np.zeros(dim + 1)
    c_lin[dim] = -1.0  # maximize t
    nu = geo.m * (len(geo.ops) + 1) + 2

    u = np.concatenate([_svec(geo.stack, P0), [t0]])
    mu = opts.mu_init
    while True:
        u, _ = newton.center(blocks, c_lin, u, mu, _COARSE_TOL)
        P = _smat(geo.stack, u[:dim])
        t = float(u[dim])
        gap = nu / mu
        margin_now = geo.margin_of(P)
        if stop_early and margin_now >= delta + headroom:
            return P, t + gap, True
        if t + gap < delta:
            return P, t + gap, False
        if gap <= opts.gap_tol * max(1.0, abs(t)):
            return P, t + gap, margin_now > delta
        mu *= opts.mu_factor


def _stage_two(geo, delta, C, opts, newton, P_start):
    """Follow the central path of min <C, P> from a strictly feasible start."""
    blocks = geo.blocks(delta, with_margin_var=False)
    c_lin = _svec(geo.stack, C)
    nu = geo.m * (len(geo.ops) + 1) + 1

    u = _svec(geo.stack, P_start)
    mu = opts.mu_init
    while True:
        u, _ = newton.center(blocks, c_lin, u, mu, _COARSE_TOL)
        gap = nu / mu
        obj = float(c_lin @ u)
        # Stop once the barrier carries weight gap_tol relative to the
        # objective; the remaining suboptimality is then at most nu / mu.
        if 1.0 / mu <= opts.gap_tol * max(1.0, abs(obj)):
            u, _ = newton.center(blocks, c_lin, u, mu, opts.inner_tol, step_cap=15)
            return _smat(geo.stack, u), gap
        mu *= opts.mu_factor
