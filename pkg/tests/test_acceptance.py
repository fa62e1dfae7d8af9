"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
summary.  The certification sweep of the bundled two-mode system is computed
once and shared.
"""

import time

import numpy as np
import pytest

from kronlyap import (
    Infeasible,
    RandomPolicy,
    boundary_trace,
    certify,
    chain_rule_residual,
    contains,
    enumerate_basis,
    eval_V,
    eval_monomials,
    integrate,
    integrate_outer,
    kron_power,
    kron_sum,
    monomial_dynamics,
    selector_recursive_n2,
    sos_factor,
    sos_defect,
    validate,
)

SWEEP_LEVELS = range(1, 14)


@pytest.fixture(scope="module")
def sweep(demo_system):
    """Certificates for c = 1..13 with the x1 objective, plus wall times."""
    certs, times = {}, {}
    for c in SWEEP_LEVELS:
        start = time.perf_counter()
        certs[c] = certify(demo_system, c, objective="x1")
        times[c] = time.perf_counter() - start
    return certs, times


@pytest.fixture(scope="module")
def reach_batch(demo_system):
    """100 random-switching trajectories from [1, 0]."""
    return [integrate(demo_system, RandomPolicy(seed=s), [1.0, 0.0],
                      horizon=20.0, step=1e-3) for s in range(100)]


def test_criterion_01_feasibility_sweep(sweep):
    certs, times = sweep
    assert sorted(certs) == list(SWEEP_LEVELS)
    for c in SWEEP_LEVELS:
        assert certs[c] is not None, f"level {c} infeasible"
        assert times[c] < 10.0, f"level {c} took {times[c]:.1f} s"
    total = sum(times.values())
    assert total < 120.0
    print(f"\nACCEPTANCE 1 PASS: 13/13 levels feasible, slowest "
          f"{max(times.values()):.2f} s, total {total:.2f} s")


def test_criterion_02_certificate_soundness(demo_system, sweep):
    certs, _ = sweep
    worst_floor, worst_lmi_slack = np.inf, np.inf
    for c, cert in certs.items():
        ops = monomial_dynamics(demo_system, c, basis=cert.basis)
        delta = 1e-6 * max(np.linalg.norm(B, 2) for B in ops.reduced)
        G = cert.gram
        floor_min = np.linalg.eigvalsh(G - np.eye(G.shape[0])).min()
        assert floor_min >= -1e-8, f"level {c} floor {floor_min}"
        for B in ops.reduced:
            top = np.linalg.eigvalsh(B.T @ G + G @ B).max()
            assert top <= -delta + 1e-8, f"level {c} margin {top} vs {-delta}"
            worst_lmi_slack = min(worst_lmi_slack, -delta + 1e-8 - top)
        worst_floor = min(worst_floor, floor_min)
        assert validate(cert, demo_system).passed
    print(f"\nACCEPTANCE 2 PASS: all margins hold, worst floor {worst_floor:.2e}, "
          f"tightest decrease slack {worst_lmi_slack:.2e}")


def test_criterion_03_lift_identity():
    rng = np.random.default_rng(2024)
    checked = 0
    for n in (2, 3, 4):
        for c in range(1, 7):
            basis = enumerate_basis(n, c)
            S = basis.selector
            for _ in range(100):
                xi = rng.integers(-3, 4, size=n).astype(float)
                assert np.array_equal(kron_power(xi, c), S @ eval_monomials(basis, xi))
                xf = rng.uniform(-2.0, 2.0, size=n)
                lhs = kron_power(xf, c)
                rhs = S @ eval_monomials(basis, xf)
                err = np.linalg.norm(lhs - rhs)
                assert err <= 1e-12 * max(1.0, np.linalg.norm(lhs))
                checked += 2
    print(f"\nACCEPTANCE 3 PASS: tensor/monomial lift identity on {checked} states")


def test_criterion_04_chain_rule_consistency(demo_system):
    rng = np.random.default_rng(404)
    worst = 0.0
    for c in SWEEP_LEVELS:
        ops = monomial_dynamics(demo_system, c)
        for _ in range(100):
            x = rng.uniform(-1.0, 1.0, size=2)
            if np.abs(x).max() < 1e-3:
                continue
            for i in range(2):
                worst = max(worst, chain_rule_residual(ops, demo_system, x, i))
    assert worst <= 1e-10
    oracle = np.array([[-1.0, 1.0, 0.0], [-0.5, -1.0, 0.5], [0.0, -1.0, -1.0]])
    got = monomial_dynamics(demo_system, 2).reduced[0]
    assert np.abs(got - oracle).max() <= 1e-12
    print(f"\nACCEPTANCE 4 PASS: worst chain-rule residual {worst:.2e}, "
          f"degree-2 operator matches the hand derivation")


def test_criterion_05_planar_selector_recursion():
    explicit = np.array([[1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    assert np.array_equal(selector_recursive_n2(2), explicit)
    for c in SWEEP_LEVELS:
        assert np.array_equal(selector_recursive_n2(c), enumerate_basis(2, c).selector)
    print("\nACCEPTANCE 5 PASS: recursive selector equals enumeration for c = 1..13")


def test_criterion_06_kron_square_lift_property(demo_system):
    quad = certify(demo_system, 1, objective="feas")
    Q = quad.gram / np.linalg.norm(quad.gram, 2)
    P = np.kron(Q, Q)
    worst = -np.inf
    for A in demo_system.modes:
        K = kron_sum(A, 2)
        worst = max(worst, np.linalg.eigvalsh(K.T @ P + P @ K).max())
    assert worst < -1e-10
    print(f"\nACCEPTANCE 6 PASS: lifted quadratic stays negative, max eig {worst:.2e}")


def test_criterion_07_outer_flow_equivalence(demo_system):
    policy = RandomPolicy(seed=7)
    x0 = np.array([1.0, 0.0])
    vec = integrate(demo_system, policy, x0, horizon=10.0, step=1e-3)
    mat = integrate_outer(demo_system, policy, np.outer(x0, x0),
                          horizon=10.0, step=1e-3)
    rank_one = np.einsum("ti,tj->tij", vec.states, vec.states)
    sup = float(np.abs(mat.outer_states - rank_one).max())
    assert sup <= 1e-6
    print(f"\nACCEPTANCE 7 PASS: outer-product flow tracks x x^T, sup error {sup:.2e}")


def test_criterion_08_invariant_set_nesting(demo_system, sweep, reach_batch):
    certs, _ = sweep
    sets = {c: boundary_trace(certs[c], [1.0, 0.0]) for c in (1, 5, 13)}
    a1, a5, a13 = sets[1].area, sets[5].area, sets[13].area
    assert a5 <= 0.99 * a1, f"{a5} vs {a1}"
    assert a13 <= 0.99 * a5, f"{a13} vs {a5}"
    for traj in reach_batch:
        assert not traj.diverged
        for s in sets.values():
            vals = eval_V(s.members[0][0], traj.states)
            assert np.max(vals) <= s.level * (1 + 1e-6)
    assert all(contains(sets[13], traj.states[-1], slack=1e-6) for traj in reach_batch)
    print(f"\nACCEPTANCE 8 PASS: areas {a1:.4f} > {a5:.4f} > {a13:.4f}, "
          f"100 trajectories contained in every set")


def test_criterion_09_negative_control(unstable_system):
    for c in (1, 2, 3):
        with pytest.raises(Infeasible):
            certify(unstable_system, c)
    diverged = 0
    for seed in range(100):
        traj = integrate(unstable_system, RandomPolicy(seed=seed), [1.0, 0.0],
                         horizon=20.0, step=1e-3)
        diverged += traj.diverged
    assert diverged == 100
    print("\nACCEPTANCE 9 PASS: expanding mode infeasible at c = 1, 2, 3; "
          "100/100 simulations diverge")


def test_criterion_10_sum_of_squares_witness(sweep):
    certs, _ = sweep
    rng = np.random.default_rng(1010)
    worst = 0.0
    for c, cert in certs.items():
        L = sos_factor(cert)
        assert np.array_equal(L, np.triu(L))
        assert np.allclose(L.T @ L, cert.gram, rtol=0, atol=1e-8 * np.abs(cert.gram).max())
        pts = rng.uniform(-1.5, 1.5, size=(100, 2))
        worst = max(worst, float(np.max(sos_defect(cert, pts))))
    assert worst <= 1e-10
    print(f"\nACCEPTANCE 10 PASS: every certificate factors as a sum of squares, "
          f"worst relative defect {worst:.2e}")
