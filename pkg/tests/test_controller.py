import dataclasses

import numpy as np
import pytest

from myolink import (
    ControllerConfig,
    DynamicsTerms,
    ErrorState,
    NumericalFault,
    PsiDotEstimator,
    ValidationError,
    control_input,
    dynamics_terms,
    error_system,
    lyapunov_diagnostics,
    solve_lyapunov,
    synthetic_feedback,
    tracking_error,
    zeta_dot,
)
from myolink.simulate import simulate


def test_config_validation():
    with pytest.raises(ValidationError):
        make_config(kp=-1.0)
    with pytest.raises(ValidationError):
        ControllerConfig(kp=np.ones(3), kd=np.ones(3), Q=-np.eye(6), R=np.eye(3), gamma=np.eye(3))
    with pytest.raises(ValidationError):
        ControllerConfig(kp=np.ones(3), kd=np.ones(3), Q=np.eye(6), R=np.eye(3),
                         gamma=np.eye(3), psi_dot_mode="spline")


def make_config(n=3, kp=100.0, kd=20.0, q=10.0, r=0.1, gamma=30.0):
    return ControllerConfig(
        kp=np.full(n, kp),
        kd=np.full(n, kd),
        Q=q * np.eye(2 * n),
        R=r * np.eye(n),
        gamma=gamma * np.eye(n),
    )


# ---------------------------------------------------------------------------
# tracking error


def test_zero_error_at_reference():
    q = np.array([0.3, -0.1, 0.9])
    e = tracking_error(q, np.zeros(3), q, np.zeros(3))
    np.testing.assert_array_equal(e.e, np.zeros(6))


def test_offset_from_preset_targets():
    q_des = np.radians([50.0, 27.0, -45.0])
    q = q_des + np.radians(10.0)
    e = tracking_error(q, np.zeros(3), q_des, np.zeros(3))
    np.testing.assert_allclose(np.degrees(e.q_err), [10.0, 10.0, 10.0], rtol=1e-13)
    np.testing.assert_array_equal(e.qd_err, np.zeros(3))


def test_error_antisymmetry(rng):
    q = rng.standard_normal(3)
    q_des = rng.standard_normal(3)
    fwd = tracking_error(q, np.zeros(3), q_des, np.zeros(3))
    rev = tracking_error(q_des, np.zeros(3), q, np.zeros(3))
    np.testing.assert_allclose(fwd.q_err, -rev.q_err, rtol=1e-15)


# ---------------------------------------------------------------------------
# synthetic feedback


def test_feedback_is_gravity_at_setpoint(scenario):
    model = scenario.model
    cfg = make_config()
    q = scenario.q_target
    terms = dynamics_terms(model, q, np.zeros(3))
    e = tracking_error(q, np.zeros(3), q, np.zeros(3))
    psi = synthetic_feedback(terms, e, np.zeros(3), cfg)
    np.testing.assert_allclose(psi, terms.g, rtol=1e-15)


def test_feedback_reduces_to_acceleration():
    cfg = make_config()
    terms = DynamicsTerms(D=np.eye(3), C=np.zeros((3, 3)), g=np.zeros(3))
    e = tracking_error(np.array([0.1, 0.0, -0.2]), np.array([0.5, 0.0, 0.0]),
                       np.zeros(3), np.zeros(3))
    a = -cfg.kd * e.qd_err - cfg.kp * e.q_err
    np.testing.assert_allclose(synthetic_feedback(terms, e, np.zeros(3), cfg), a, rtol=1e-15)


def test_feedback_against_independent_evaluation(scenario, rng):
    model = scenario.model
    cfg = make_config()
    for _ in range(30):
        q = scenario.q_target + rng.uniform(-0.5, 0.5, 3)
        qdot = rng.uniform(-2, 2, 3)
        qddot_des = rng.uniform(-4, 4, 3)
        terms = dynamics_terms(model, q, qdot)
        e = tracking_error(q, qdot, scenario.q_target, np.zeros(3))
        psi = synthetic_feedback(terms, e, qddot_des, cfg)
        a = qddot_des - np.diag(cfg.kd) @ e.qd_err - np.diag(cfg.kp) @ e.q_err
        expected = terms.D @ a + terms.C @ qdot + terms.g
        assert np.linalg.norm(psi - expected) <= 1e-12 * max(np.linalg.norm(expected), 1e-9)


# ---------------------------------------------------------------------------
# error system and Lyapunov synthesis


def test_error_system_eigenvalues_critical_damping():
    cfg = make_config(kp=4.0, kd=4.0)
    A, _ = error_system(np.eye(3), cfg)
    eigs = np.linalg.eigvals(A)
    np.testing.assert_allclose(sorted(eigs.real), [-2.0] * 6, atol=1e-12)
    np.testing.assert_allclose(eigs.imag, np.zeros(6), atol=1e-12)


def test_error_system_shape(rng):
    cfg = make_config()
    D = np.diag([0.2, 0.3, 0.4])
    A, B = error_system(D, cfg)
    np.testing.assert_array_equal(B[:3], np.zeros((3, 3)))
    np.testing.assert_allclose(B[3:], np.diag([5.0, 10.0 / 3.0, 2.5]), rtol=1e-15)
    for _ in range(20):
        kp = rng.uniform(0.5, 300.0, 3)
        kd = rng.uniform(0.5, 60.0, 3)
        cfg_i = ControllerConfig(kp=kp, kd=kd, Q=np.eye(6), R=np.eye(3), gamma=np.eye(3))
        A, _ = error_system(np.eye(3), cfg_i)
        assert np.linalg.eigvals(A).real.max() < 0.0


def test_lyapunov_scalar_balance():
    P = solve_lyapunov(-np.eye(6), 2.0 * np.eye(6))
    np.testing.assert_allclose(P, np.eye(6), rtol=1e-13)


def test_lyapunov_residual_on_random_hurwitz(rng):
    for _ in range(50):
        size = rng.integers(2, 9)
        G = rng.standard_normal((size, size))
        A = G - (np.linalg.eigvals(G).real.max() + rng.uniform(0.5, 2.0)) * np.eye(size)
        M = rng.standard_normal((size, size))
        Q = M @ M.T + 0.1 * np.eye(size)
        P = solve_lyapunov(A, Q)
        assert np.linalg.norm(A.T @ P + P @ A + Q) < 1e-10 * np.linalg.norm(Q)
        assert np.linalg.norm(P - P.T) < 1e-12
        np.linalg.cholesky(P)


def test_lyapunov_rejects_non_hurwitz():
    A = np.diag([1.0, -2.0, -3.0])
    with pytest.raises(NumericalFault, match="Hurwitz"):
        solve_lyapunov(A, np.eye(3))


# ---------------------------------------------------------------------------
# torque-rate law


def test_zeta_dot_passthrough():
    cfg = make_config()
    e = ErrorState(np.zeros(6))
    psi_dot = np.array([0.4, -0.2, 1.0])
    B = np.vstack([np.zeros((3, 3)), np.eye(3)])
    P = np.eye(6)
    np.testing.assert_array_equal(zeta_dot(psi_dot, np.zeros(3), e, B, P, cfg), psi_dot)


def test_zeta_dot_pure_gamma_decay():
    cfg = make_config(r=1.0, gamma=7.5)
    e = ErrorState(np.zeros(6))
    w = np.array([0.2, 0.0, -1.0])
    B = np.vstack([np.zeros((3, 3)), np.eye(3)])
    zd = zeta_dot(np.zeros(3), w, e, B, np.eye(6), cfg)
    np.testing.assert_allclose(zd, -7.5 * w, rtol=1e-14)


def test_zeta_dot_residual(rng):
    cfg = make_config()
    for _ in range(30):
        e = ErrorState(rng.standard_normal(6))
        w = rng.standard_normal(3)
        psi_dot = rng.standard_normal(3)
        B = np.vstack([np.zeros((3, 3)), rng.standard_normal((3, 3))])
        M = rng.standard_normal((6, 6))
        P = M @ M.T + np.eye(6)
        zd = zeta_dot(psi_dot, w, e, B, P, cfg)
        residual = cfg.R @ (psi_dot - zd) - (cfg.gamma @ w + B.T @ P @ e.e)
        assert np.linalg.norm(residual) < 1e-10


# ---------------------------------------------------------------------------
# pseudoinverse control input


def test_zero_rhs_gives_zero_input(rng):
    J = rng.standard_normal((3, 8))
    U = control_input(np.zeros(3), np.zeros((3, 3)), J, np.zeros(3), np.zeros(8))
    np.testing.assert_array_equal(U, np.zeros(8))


def test_scalar_case_divides():
    U = control_input(np.array([2.5]), np.zeros((1, 1)), np.array([[0.5]]),
                      np.zeros(1), np.zeros(1))
    np.testing.assert_allclose(U, [5.0], rtol=1e-15)


def test_least_squares_optimality(rng):
    for _ in range(30):
        J = rng.standard_normal((3, 8))
        zdot = rng.standard_normal(3)
        dtau_dq = rng.standard_normal((3, 3))
        qdot = rng.standard_normal(3)
        Ldot = rng.standard_normal(8)
        U = control_input(zdot, dtau_dq, J, qdot, Ldot)
        rhs = zdot - dtau_dq @ qdot - J @ Ldot
        base = np.linalg.norm(J @ U - rhs)
        assert base < 1e-9  # full row rank: exact solution
        for _ in range(100):
            delta = rng.standard_normal(8) * 10 ** rng.uniform(-6, 0)
            assert np.linalg.norm(J @ (U + delta) - rhs) >= base - 1e-12
        # minimum norm: no null-space component
        _, _, vt = np.linalg.svd(J, full_matrices=False)
        assert np.linalg.norm(U - vt.T @ (vt @ U)) < 1e-10


def test_control_authority_lost():
    J = np.zeros((3, 8))
    with pytest.raises(NumericalFault, match="authority"):
        control_input(np.ones(3), np.zeros((3, 3)), J, np.zeros(3), np.zeros(8))


def test_rank_deficient_uses_threshold(rng):
    J = np.outer(np.array([1.0, 0.0, 0.0]), rng.standard_normal(8))
    zdot = np.array([1.0, 0.5, -0.5])
    U = control_input(zdot, np.zeros((3, 3)), J, np.zeros(3), np.zeros(8))
    # only the spanned component is matched
    np.testing.assert_allclose((J @ U)[0], 1.0, rtol=1e-10)
    np.testing.assert_allclose((J @ U)[1:], np.zeros(2), atol=1e-12)


# ---------------------------------------------------------------------------
# Lyapunov diagnostics


def test_diagnostics_zero_state():
    cfg = make_config()
    e = ErrorState(np.zeros(6))
    B = np.vstack([np.zeros((3, 3)), np.eye(3)])
    V, V_dot = lyapunov_diagnostics(e, np.zeros(3), np.eye(6), cfg, np.zeros(3), np.zeros(3), B)
    assert V == 0.0 and V_dot == 0.0


def test_lyapunov_positive(rng):
    cfg = make_config()
    P = solve_lyapunov(error_system(np.eye(3), cfg)[0], cfg.Q)
    B = np.vstack([np.zeros((3, 3)), np.eye(3)])
    for _ in range(30):
        e = ErrorState(rng.standard_normal(6))
        w = rng.standard_normal(3)
        V, _ = lyapunov_diagnostics(e, w, P, cfg, np.zeros(3), np.zeros(3), B)
        assert V > 0.0


def test_substitution_identity(rng):
    """With the prescribed torque rate, V_dot collapses to -eQe - 2wGw."""
    cfg = make_config()
    P = solve_lyapunov(error_system(np.eye(3), cfg)[0], cfg.Q)
    for _ in range(50):
        e = ErrorState(rng.standard_normal(6))
        w = rng.standard_normal(3)
        psi_dot = rng.standard_normal(3)
        B = np.vstack([np.zeros((3, 3)), rng.standard_normal((3, 3))])
        zd = zeta_dot(psi_dot, w, e, B, P, cfg)
        _, V_dot = lyapunov_diagnostics(e, w, P, cfg, zd, psi_dot, B)
        closed = -e.e @ cfg.Q @ e.e - 2.0 * w @ cfg.gamma @ w
        assert abs(V_dot - closed) <= 1e-10 * max(abs(closed), 1.0)


# ---------------------------------------------------------------------------
# Psi_dot estimation


def test_psi_dot_constant_history():
    est = PsiDotEstimator(dt=0.01)
    psi = np.array([3.0, -1.0, 0.5])
    assert not est.primed
    np.testing.assert_array_equal(est.update(psi), np.zeros(3))
    assert est.primed
    np.testing.assert_array_equal(est.update(psi), np.zeros(3))


def test_psi_dot_linear_exact():
    dt = 0.05
    est = PsiDotEstimator(dt=dt)
    rate = np.array([1.0, 2.0, 3.0])
    est.update(0.0 * rate)
    for k in range(1, 5):
        out = est.update(k * dt * rate)
        np.testing.assert_allclose(out, rate, rtol=1e-12)


def test_psi_dot_modes_agree_on_smooth_segment(scenario):
    """Backward differences approach the analytic rate at O(dt)."""
    analytic_scn = dataclasses.replace(
        scenario,
        controller=dataclasses.replace(scenario.controller, psi_dot_mode="directional-analytic"),
        t_end=0.4,
        init_offset_deg=6.0,
    )
    errors = []
    for dt in (2e-3, 1e-3):
        scn = dataclasses.replace(analytic_scn, dt=dt)
        trace = simulate(scn)
        assert trace.fault is None
        # backward difference of the logged Psi vs the logged analytic rate,
        # compared over the smooth tail of the transient
        bd = (trace.psi[1:] - trace.psi[:-1]) / dt
        analytic = trace.psi_rate[1:]
        window = slice(int(0.15 / dt), len(bd))
        scale = max(np.linalg.norm(analytic[window], axis=1).max(), 1e-9)
        errors.append(np.linalg.norm(bd[window] - analytic[window], axis=1).max() / scale)
    assert errors[1] < 0.75 * errors[0]  # shrinks roughly linearly with dt
    assert errors[1] < 0.15
