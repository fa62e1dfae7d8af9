"""Fixed-step simulation of switched trajectories and the matrix outer flow.

Integration is classical 4th order with switches snapped to step boundaries:
inside a dwell interval the active mode is constant, so the one-step update
is the degree-4 Taylor polynomial of the matrix exponential applied to the
state.  Snapping keeps the integrator's order intact between switches, which
are the only points where solutions lose smoothness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .certificate import Certificate, WrongSystemError, eval_V
from .hierarchy import kron_sum, monomial_dynamics
from .tensor_lift import SwitchedSystem, eval_monomials

DEFAULT_DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class FixedPolicy:
    mode: int


@dataclass(frozen=True)
class PeriodicPolicy:
    dwell: float
    sequence: tuple[int, ...]

    def __post_init__(self):
        if self.dwell <= 0:
            raise ValueError("dwell must be positive")
        if not self.sequence:
            raise ValueError("sequence must be nonempty")
        object.__setattr__(self, "sequence", tuple(int(i) for i in self.sequence))


@dataclass(frozen=True)
class RandomPolicy:
    dwell_range: tuple[float, float] = (0.05, 0.5)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.dwell_range
        if not (0 < lo <= hi):
            raise ValueError("dwell_range must satisfy 0 < lo <= hi")


@dataclass(frozen=True)
class AdversarialPolicy:
    """Greedy falsifier: at each step take the mode with the largest Vdot."""

    certificate: Certificate


SwitchingPolicy = Union[FixedPolicy, PeriodicPolicy, RandomPolicy, AdversarialPolicy]


def adversarial_policy(cert: Certificate) -> AdversarialPolicy:
    return AdversarialPolicy(certificate=cert)


@dataclass(frozen=True)
class Trajectory:
    """Sampled states with the active mode per step interval.

    states holds row vectors for state-space runs; outer_states holds the
    n x n matrices of outer-product flow runs (states is None there).
    """

    times: np.ndarray
    states: np.ndarray | None
    modes: np.ndarray
    outer_states: np.ndarray | None = None
    diverged: bool = False
    meta: dict = field(default_factory=dict)


def policy_descriptor(policy: SwitchingPolicy) -> dict:
    if isinstance(policy, FixedPolicy):
        return {"kind": "fixed", "mode": policy.mode}
    if isinstance(policy, PeriodicPolicy):
        return {"kind": "periodic", "dwell": policy.dwell, "sequence": list(policy.sequence)}
    if isinstance(policy, RandomPolicy):
        return {"kind": "random", "dwell_range": list(policy.dwell_range), "seed": policy.seed}
    if isinstance(policy, AdversarialPolicy):
        return {"kind": "adversarial", "certificate_level": policy.certificate.c}
    raise TypeError(f"unknown policy {policy!r}")


def _rk4_transition(A: np.ndarray, step: float) -> np.ndarray:
    """One classical 4th-order step of xdot = A x as a linear map."""
    M = step * A
    n = A.shape[0]
    R = np.eye(n)
    term = np.eye(n)
    for k in range(1, 5):
        term = term @ M / k
        R = R + term
    return R


def _schedule_events(policy: SwitchingPolicy, system: SwitchedSystem,
                     horizon: float) -> list[tuple[float, int]]:
    """(switch time, mode) pairs covering [0, horizon), first at t = 0."""
    N = system.num_modes
    if isinstance(policy, FixedPolicy):
        if not 0 <= policy.mode < N:
            raise ValueError(f"mode index {policy.mode} out of range")
        return [(0.0, policy.mode)]
    if isinstance(policy, PeriodicPolicy):
        for i in policy.sequence:
            if not 0 <= i < N:
                raise ValueError(f"mode index {i} out of range")
        events = []
        t, j = 0.0, 0
        while t < horizon:
            events.append((t, policy.sequence[j % len(policy.sequence)]))
            t += policy.dwell
            j += 1
        return events
    if isinstance(policy, RandomPolicy):
        rng = np.random.default_rng(policy.seed)
        lo, hi = policy.dwell_range
        events = []
        t = 0.0
        while t < horizon:
            events.append((t, int(rng.integers(0, N))))
            t += float(rng.uniform(lo, hi))
        return events
    raise TypeError("adversarial policies are resolved during integration")


def _interval_modes(events: list[tuple[float, int]], steps: int, step: float) -> np.ndarray:
    """Per-step active mode with switch instants snapped to the grid."""
    modes = np.empty(steps, dtype=np.int64)
    starts = [min(steps, int(np.ceil(t / step - 1e-9))) for t, _ in events]
    starts[0] = 0
    bounds = starts[1:] + [steps]
    for (t_mode, s0, s1) in zip(events, starts, bounds):
        modes[s0:s1] = t_mode[1]
    return modes


def _check_grid(horizon: float, step: float) -> int:
    if step <= 0 or horizon < step:
        raise ValueError("need step > 0 and horizon >= step")
    return int(round(horizon / step))


def integrate(system: SwitchedSystem, policy: SwitchingPolicy, x0,
              horizon: float, step: float,
              divergence_norm: float = DEFAULT_DIVERGENCE_NORM) -> Trajectory:
    """Simulate xdot = A(t) x under the policy from x0.

    Stops early with diverged=True if the state norm exceeds divergence_norm
    or turns non-finite; the trajectory then ends at the last finite state.
    """
    steps = _check_grid(horizon, step)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n,):
        raise ValueError(f"x0 must have shape ({system.n},)")
    times = step * np.arange(steps + 1)
    transitions = [_rk4_transition(A, step) for A in system.modes]
    meta = {"policy": policy_descriptor(policy), "step": step, "horizon": horizon,
            "divergence_norm": divergence_norm}

    if isinstance(policy, AdversarialPolicy):
        modes, states, end, diverged = _integrate_adversarial(
            system, policy.certificate, x0, steps, transitions, divergence_norm)
    else:
        modes = _interval_modes(_schedule_events(policy, system, horizon), steps, step)
        states = np.empty((steps + 1, system.n))
        states[0] = x0
        end, diverged = steps, False
        x = x0
        for k in range(steps):
            x = transitions[modes[k]] @ x
            if not np.all(np.isfinite(x)):
                end, diverged = k, True
                break
            states[k + 1] = x
            if np.linalg.norm(x) > divergence_norm:
                end, diverged = k + 1, True
                break
    return Trajectory(times=times[:end + 1], states=states[:end + 1],
                      modes=modes[:end], diverged=diverged, meta=meta)


def _integrate_adversarial(system, cert, x0, steps, transitions, divergence_norm):
    if cert.system_hash != system.content_hash():
        raise WrongSystemError("adversarial certificate was issued for a different system")
    ops = monomial_dynamics(system, cert.c, basis=cert.basis)
    quads = [B.T @ cert.gram + cert.gram @ B for B in ops.reduced]
    modes = np.empty(steps, dtype=np.int64)
    states = np.empty((steps + 1, system.n))
    states[0] = x0
    x = x0
    end, diverged = steps, False
    for k in range(steps):
        y = eval_monomials(cert.basis, x)
        rates = [float(y @ Q @ y) for Q in quads]
        i = int(np.argmax(rates))
        modes[k] = i
        x = transitions[i] @ x
        if not np.all(np.isfinite(x)):
            end, diverged = k, True
            break
        states[k + 1] = x
        if np.linalg.norm(x) > divergence_norm:
            end, diverged = k + 1, True
            break
    return modes, states, end, diverged


def integrate_outer(system: SwitchedSystem, policy: SwitchingPolicy, X0,
                    horizon: float, step: float,
                    divergence_norm: float = DEFAULT_DIVERGENCE_NORM) -> Trajectory:
    """Simulate the matrix flow Xdot = A(t) X + X A(t)^T from X0.

    Runs the same integrator on the vectorized equation, whose generator is
    the 2-fold Kronecker sum of the active mode, so a run sharing the policy
    (and seed) with integrate() sees identical switch instants.  Symmetry of
    X0 is preserved exactly by the flow.
    """
    steps = _check_grid(horizon, step)
    X0 = np.asarray(X0, dtype=float)
    n = system.n
    if X0.shape != (n, n):
        raise ValueError(f"X0 must have shape ({n}, {n})")
    if isinstance(policy, AdversarialPolicy):
        raise TypeError("adversarial policies need a state vector, not a matrix state")
    times = step * np.arange(steps + 1)
    transitions = [_rk4_transition(kron_sum(A, 2), step) for A in system.modes]
    modes = _interval_modes(_schedule_events(policy, system, horizon), steps, step)
    flats = np.empty((steps + 1, n * n))
    flats[0] = X0.reshape(-1)
    v = flats[0]
    end, diverged = steps, False
    for k in range(steps):
        v = transitions[modes[k]] @ v
        if not np.all(np.isfinite(v)):
            end, diverged = k, True
            break
        flats[k + 1] = v
        if np.linalg.norm(v) > divergence_norm:
            end, diverged = k + 1, True
            break
    meta = {"policy": policy_descriptor(policy), "step": step, "horizon": horizon,
            "divergence_norm": divergence_norm}
    return Trajectory(times=times[:end + 1], states=None,
                      outer_states=flats[:end + 1].reshape(-1, n, n),
                      modes=modes[:end], diverged=diverged, meta=meta)


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    level: float
    max_increase: float
    num_flagged: int
    first_flagged_time: float | None


def check_monotone(cert: Certificate, traj: Trajectory,
                   rel_tol: float = 1e-9) -> MonotoneReport:
    """Flag any V increase along the trajectory beyond rel_tol * V(x0)."""
    if traj.states is None:
        raise ValueError("monotonicity checks need a state-space trajectory")
    values = eval_V(cert, traj.states)
    level = float(values[0])
    jumps = np.diff(values)
    tol = rel_tol * level
    flagged = np.flatnonzero(jumps > tol)
    return MonotoneReport(
        passed=flagged.size == 0,
        level=level,
        max_increase=float(jumps.max()) if jumps.size else 0.0,
        num_flagged=int(flagged.size),
        first_flagged_time=float(traj.times[flagged[0] + 1]) if flagged.size else None,
    )


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """(t, x1..xn, mode) rows, or the row-major flattened matrix for outer runs.

    Policy parameters and the step size ride along as header comments so a
    file is reproducible on its own.
    """
    with open(path, "w") as fh:
        for key in sorted(traj.meta):
            fh.write(f"# {key}: {json.dumps(traj.meta[key])}\n")
        if traj.diverged:
            fh.write("# diverged: true\n")
        if traj.states is not None:
            n = traj.states.shape[1]
            cols = ",".join(f"x{j + 1}" for j in range(n))
            fh.write(f"t,{cols},mode\n")
            data = traj.states
        else:
            n = traj.outer_states.shape[1]
            cols = ",".join(f"X{a + 1}{b + 1}" for a in range(n) for b in range(n))
            fh.write(f"t,{cols},mode\n")
            data = traj.outer_states.reshape(traj.outer_states.shape[0], -1)
        for k, t in enumerate(traj.times.tolist()):
            mode = traj.modes[min(k, len(traj.modes) - 1)] if len(traj.modes) else 0
            row = ",".join(repr(float(v)) for v in data[k])
            fh.write(f"{t!r},{row},{mode}\n")
