import numpy as np
import pytest
from scipy.linalg import expm

from kronlyap import (
    AdversarialPolicy,
    Certificate,
    FixedPolicy,
    PeriodicPolicy,
    RandomPolicy,
    SwitchedSystem,
    adversarial_policy,
    check_monotone,
    integrate,
    integrate_outer,
)
from kronlyap.simulate import write_trajectory_csv


def test_scalar_decay_matches_exponential():
    sys1 = SwitchedSystem(n=2, modes=(-np.eye(2),))
    traj = integrate(sys1, FixedPolicy(0), [1.0, 0.0], horizon=1.0, step=1e-3)
    assert np.abs(traj.states[-1] - [np.exp(-1.0), 0.0]).max() < 1e-8


def test_spiral_norm_decay(demo_system):
    # mode 0 has eigenvalues -0.5 +/- 0.5i, so the state norm is exp(-t/2)
    traj = integrate(demo_system, FixedPolicy(0), [1.0, 0.0], horizon=5.0, step=1e-3)
    norms = np.linalg.norm(traj.states, axis=1)
    assert np.abs(norms - np.exp(-0.5 * traj.times)).max() < 1e-6


def test_integrator_is_fourth_order(demo_system):
    A = demo_system.modes[1]
    single = SwitchedSystem(n=2, modes=(A,))
    x0 = np.array([1.0, 0.5])
    exact = expm(A) @ x0
    errs = []
    for h in (0.05, 0.025):
        traj = integrate(single, FixedPolicy(0), x0, horizon=1.0, step=h)
        errs.append(np.linalg.norm(traj.states[-1] - exact))
    assert 12.0 < errs[0] / errs[1] < 20.0


def test_random_policy_batch_converges(demo_system):
    for seed in range(10):
        traj = integrate(demo_system, RandomPolicy(seed=seed), [1.0, 0.0],
                         horizon=20.0, step=1e-3)
        assert not traj.diverged
        assert np.linalg.norm(traj.states[-1]) < 1e-3


def test_same_seed_reproduces_schedule(demo_system):
    a = integrate(demo_system, RandomPolicy(seed=5), [1.0, 0.0], 2.0, 1e-3)
    b = integrate(demo_system, RandomPolicy(seed=5), [1.0, 0.0], 2.0, 1e-3)
    assert np.array_equal(a.modes, b.modes)
    assert a.states.tobytes() == b.states.tobytes()


def test_periodic_policy_switches_on_schedule(demo_system):
    traj = integrate(demo_system, PeriodicPolicy(dwell=0.5, sequence=(0, 1)),
                     [1.0, 0.0], horizon=2.0, step=1e-3)
    assert traj.modes[0] == 0 and traj.modes[499] == 0
    assert traj.modes[500] == 1 and traj.modes[999] == 1
    assert traj.modes[1000] == 0


def test_divergence_reported_with_last_finite_state(unstable_system):
    traj = integrate(unstable_system, FixedPolicy(0), [1.0, 0.0],
                     horizon=20.0, step=1e-3)
    assert traj.diverged
    assert np.all(np.isfinite(traj.states))
    assert traj.times[-1] < 20.0
    assert np.linalg.norm(traj.states[-1]) > 1e6


def test_outer_flow_zero_stays_zero(demo_system):
    traj = integrate_outer(demo_system, FixedPolicy(0), np.zeros((2, 2)),
                           horizon=1.0, step=1e-3)
    assert np.abs(traj.outer_states).max() == 0.0


def test_outer_flow_tracks_rank_one_product(demo_system):
    policy = RandomPolicy(seed=42)
    x0 = np.array([1.0, 0.0])
    vec = integrate(demo_system, policy, x0, horizon=10.0, step=1e-3)
    mat = integrate_outer(demo_system, policy, np.outer(x0, x0),
                          horizon=10.0, step=1e-3)
    rank_one = np.einsum("ti,tj->tij", vec.states, vec.states)
    assert np.abs(mat.outer_states - rank_one).max() <= 1e-6


def test_outer_flow_preserves_symmetry(demo_system):
    p0, q0 = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    X0 = np.outer(p0, q0) + np.outer(q0, p0)
    traj = integrate_outer(demo_system, RandomPolicy(seed=3), X0,
                           horizon=3.0, step=1e-3)
    sym_err = np.abs(traj.outer_states - np.transpose(traj.outer_states, (0, 2, 1)))
    assert sym_err.max() < 1e-12


def test_adversarial_equals_fixed_for_single_mode(cert_c1, demo_system):
    single = SwitchedSystem(n=2, modes=(demo_system.modes[0],))
    from kronlyap import certify
    cert = certify(single, 1)
    adv = integrate(single, adversarial_policy(cert), [1.0, 0.5], 2.0, 1e-3)
    fixed = integrate(single, FixedPolicy(0), [1.0, 0.5], 2.0, 1e-3)
    assert np.array_equal(adv.modes, fixed.modes)
    assert adv.states.tobytes() == fixed.states.tobytes()


def test_adversarial_run_still_decreases(demo_system, cert_c2):
    traj = integrate(demo_system, adversarial_policy(cert_c2), [1.0, 0.0],
                     horizon=5.0, step=1e-3)
    report = check_monotone(cert_c2, traj)
    assert report.passed


def test_monotone_check_accepts_valid_certificate(demo_system, cert_c2):
    traj = integrate(demo_system, RandomPolicy(seed=17), [1.0, 0.0], 10.0, 1e-3)
    report = check_monotone(cert_c2, traj)
    assert report.passed and report.num_flagged == 0


def test_monotone_check_on_zero_trajectory(demo_system, cert_c2):
    traj = integrate(demo_system, RandomPolicy(seed=1), [0.0, 0.0], 1.0, 1e-3)
    assert check_monotone(cert_c2, traj).passed


def test_monotone_check_flags_fabricated_certificate(unstable_system):
    fake = Certificate(n=2, c=1, system_hash=unstable_system.content_hash(),
                       exponents=[[1, 0], [0, 1]], gram=np.eye(2),
                       objective="feas", margins={"delta": 0.0}, solver={})
    traj = integrate(unstable_system, FixedPolicy(0), [1.0, 0.0], 5.0, 1e-3)
    report = check_monotone(fake, traj)
    assert not report.passed
    assert report.max_increase > 0
    assert report.first_flagged_time is not None


def test_adversarial_detects_broken_certificate(demo_system, cert_c1):
    # pushing the off-diagonal far enough invalidates the decrease condition;
    # the greedy policy plus the monotonicity checker must notice
    bad = np.array(cert_c1.gram)
    bad[0, 1] += 1.5
    bad[1, 0] += 1.5
    broken = Certificate(n=2, c=1, system_hash=cert_c1.system_hash,
                         exponents=cert_c1.exponents, gram=bad,
                         objective=cert_c1.objective, margins=cert_c1.margins,
                         solver=cert_c1.solver)
    traj = integrate(demo_system, AdversarialPolicy(broken), [1.0, 0.0], 10.0, 1e-3)
    assert not check_monotone(broken, traj).passed


def test_policy_validation():
    with pytest.raises(ValueError):
        PeriodicPolicy(dwell=0.0, sequence=(0,))
    with pytest.raises(ValueError):
        RandomPolicy(dwell_range=(0.0, 0.5))


def test_mode_indices_validated(demo_system):
    with pytest.raises(ValueError):
        integrate(demo_system, FixedPolicy(5), [1.0, 0.0], 1.0, 1e-3)


def test_grid_validation(demo_system):
    with pytest.raises(ValueError):
        integrate(demo_system, FixedPolicy(0), [1.0, 0.0], horizon=0.5, step=1.0)


def test_trajectory_csv_headers_and_shape(demo_system, tmp_path):
    traj = integrate(demo_system, RandomPolicy(seed=2), [1.0, 0.0], 1.0, 1e-2)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    assert any("policy" in l and "seed" in l for l in comments)
    header = next(l for l in lines if not l.startswith("#"))
    assert header == "t,x1,x2,mode"
    data = [l for l in lines if not l.startswith("#")][1:]
    assert len(data) == len(traj.times)


def test_outer_trajectory_csv_flattens_row_major(demo_system, tmp_path):
    traj = integrate_outer(demo_system, FixedPolicy(0), np.eye(2), 0.5, 1e-2)
    path = tmp_path / "outer.csv"
    write_trajectory_csv(traj, path)
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "t,X11,X12,X21,X22,mode"
    first = [float(v) for v in lines[1].split(",")[1:5]]
    assert np.array_equal(first, traj.outer_states[0].reshape(-1))
