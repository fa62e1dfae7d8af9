import itertools

import numpy as np
import pytest

from kronlyap import (
    chain_rule_residual,
    enumerate_basis,
    kron_sum,
    monomial_dynamics,
    monomial_dynamics_dense,
)

A1 = np.array([[-0.5, 0.5], [-0.5, -0.5]])

# dynamics of (x1^2, x1*x2, x2^2) along xdot = A1 x, derived by hand
B21_ORACLE = np.array([[-1.0, 1.0, 0.0],
                       [-0.5, -1.0, 0.5],
                       [0.0, -1.0, -1.0]])


def c_fold_sums(eigs, c):
    return [sum(combo) for combo in itertools.combinations_with_replacement(eigs, c)]


def test_kron_sum_of_zero():
    assert np.array_equal(kron_sum(np.zeros((3, 3)), 2), np.zeros((9, 9)))


def test_kron_sum_of_identity():
    assert np.array_equal(kron_sum(np.eye(3), 2), 2 * np.eye(9))


def test_kron_sum_single_copy_is_the_matrix():
    assert np.array_equal(kron_sum(A1, 1), A1)


def test_kron_sum_pair_entrywise():
    want = np.array([[-1.0, 0.5, 0.5, 0.0],
                     [-0.5, -1.0, 0.0, 0.5],
                     [-0.5, 0.0, -1.0, 0.5],
                     [0.0, -0.5, -0.5, -1.0]])
    assert np.allclose(kron_sum(A1, 2), want, rtol=0, atol=1e-15)


def test_kron_sum_pair_spectrum():
    # eigenvalues of A1 are -0.5 +/- 0.5i; pair sums are -1 +/- i and -1 (twice)
    eigs = list(np.linalg.eigvals(kron_sum(A1, 2)))
    for want in (-1 + 1j, -1 - 1j, -1.0, -1.0):
        hit = min(range(len(eigs)), key=lambda k: abs(eigs[k] - want))
        assert abs(eigs[hit] - want) < 1e-12
        eigs.pop(hit)


def test_kron_sum_spectrum_law_random_matrices():
    rng = np.random.default_rng(11)
    for n in (2, 3):
        A = rng.standard_normal((n, n)) - 2 * np.eye(n)
        base = np.linalg.eigvals(A)
        for c in range(1, 5):
            sums = np.array(c_fold_sums(base, c))
            for lam in np.linalg.eigvals(kron_sum(A, c)):
                assert np.min(np.abs(sums - lam)) < 1e-8


def test_reduction_level_one_returns_modes(demo_system):
    ops = monomial_dynamics(demo_system, 1)
    for B, A in zip(ops.reduced, demo_system.modes):
        assert np.array_equal(B, A)


def test_reduction_matches_hand_oracle(demo_system):
    ops = monomial_dynamics(demo_system, 2)
    assert np.allclose(ops.reduced[0], B21_ORACLE, rtol=0, atol=1e-12)


def test_reduction_matches_dense_kron_route(demo_system):
    for c in (2, 3, 4):
        fast = monomial_dynamics(demo_system, c)
        dense = monomial_dynamics_dense(demo_system, c)
        for Bf, Bd in zip(fast.reduced, dense):
            assert np.allclose(Bf, Bd, rtol=0, atol=1e-11)


def test_selector_range_is_invariant(demo_system):
    # (I - S S+) K S == 0: the tensor operator maps the symmetric range of
    # the selector into itself, so the reduction loses nothing
    for c in (2, 3):
        b = enumerate_basis(2, c)
        S = b.selector
        proj = np.eye(S.shape[0]) - S @ b.selector_pinv
        for A in demo_system.modes:
            K = kron_sum(A, c)
            assert np.abs(proj @ K @ S).max() < 1e-12


def test_reduction_similarity(demo_system):
    for c in (2, 3, 4):
        ops = monomial_dynamics(demo_system, c)
        S = ops.basis.selector
        for B, A in zip(ops.reduced, demo_system.modes):
            assert np.abs(S @ B - kron_sum(A, c) @ S).max() < 1e-12


def test_hurwitz_preservation(demo_system):
    for c in range(1, 14):
        ops = monomial_dynamics(demo_system, c)
        for B in ops.reduced:
            assert np.linalg.eigvals(B).real.max() < 0


def test_reduced_spectrum_is_sums_of_mode_eigenvalues(demo_system):
    for c in (2, 3, 5):
        ops = monomial_dynamics(demo_system, c)
        for B, A in zip(ops.reduced, demo_system.modes):
            sums = np.array(c_fold_sums(np.linalg.eigvals(A), c))
            for lam in np.linalg.eigvals(B):
                assert np.min(np.abs(sums - lam)) < 1e-8


def test_chain_rule_exact_at_level_one(demo_system):
    ops = monomial_dynamics(demo_system, 1)
    rng = np.random.default_rng(12)
    for _ in range(10):
        x = rng.uniform(-2, 2, size=2)
        assert chain_rule_residual(ops, demo_system, x, 0) == 0.0


def test_chain_rule_at_unit_vector(demo_system):
    ops = monomial_dynamics(demo_system, 2)
    assert chain_rule_residual(ops, demo_system, [1.0, 0.0], 0) <= 1e-12


def test_chain_rule_high_level(demo_system):
    ops = monomial_dynamics(demo_system, 13)
    rng = np.random.default_rng(13)
    for _ in range(50):
        x = rng.uniform(-1, 1, size=2)
        for i in range(2):
            assert chain_rule_residual(ops, demo_system, x, i) <= 1e-10


def test_chain_rule_rejects_zero_state(demo_system):
    ops = monomial_dynamics(demo_system, 2)
    with pytest.raises(ValueError):
        chain_rule_residual(ops, demo_system, [0.0, 0.0], 0)


def test_operators_record_system_hash(demo_system):
    ops = monomial_dynamics(demo_system, 3)
    assert ops.system_hash == demo_system.content_hash()
    assert ops.dim == ops.basis.size == 4


def test_mismatched_basis_rejected(demo_system):
    b = enumerate_basis(2, 3)
    with pytest.raises(ValueError):
        monomial_dynamics(demo_system, 2, basis=b)


def test_kron_sum_size_cap():
    from kronlyap import SizeCapError
    with pytest.raises(SizeCapError):
        kron_sum(np.eye(3), 16, cap=2**12)


def test_pair_lift_of_pair_lift_is_the_fourfold_sum():
    # applying the paired-state construction twice reaches state dimension
    # n**4 and agrees exactly with the 4-fold Kronecker sum
    rng = np.random.default_rng(14)
    A = rng.standard_normal((2, 2))
    K2 = kron_sum(A, 2)
    twice = np.kron(np.eye(4), K2) + np.kron(K2, np.eye(4))
    assert np.allclose(twice, kron_sum(A, 4), rtol=0, atol=1e-13)
