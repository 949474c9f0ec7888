import numpy as np
import pytest

from myolink import (
    DHRow,
    LinkInertia,
    LinkageModel,
    NumericalFault,
    ValidationError,
    dynamics_terms,
    forward_dynamics,
    forward_kinematics,
    potential_energy,
)
from conftest import PENDULUM_LENGTH, PENDULUM_MASS, make_pendulum, random_states

TARGET = np.radians([50.0, 27.0, -45.0])


def test_translation_chain_accumulates_offsets():
    rows = (
        DHRow(0.0, 0.1, 0.2, 0.0, "fixed"),
        DHRow(0.0, 0.3, 0.05, 0.0, "fixed"),
    )
    model = LinkageModel(dh_rows=rows, inertias=())
    assert model.dof == 0
    frames = forward_kinematics(model, [])
    np.testing.assert_allclose(frames[-1, :3, 3], [0.25, 0.0, 0.4], atol=1e-15)
    with pytest.raises(ValidationError, match="no degrees of freedom"):
        dynamics_terms(model, [], [])


def test_rotations_stay_rigid(model, rng):
    for _ in range(50):
        q = rng.uniform(-np.pi, np.pi, model.dof)
        for frame in forward_kinematics(model, q):
            R = frame[:3, :3]
            assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-12
            assert abs(np.linalg.det(R) - 1.0) < 1e-12
            np.testing.assert_array_equal(frame[3], [0.0, 0.0, 0.0, 1.0])


def test_shoulder_fk_against_symbolic_composition(model):
    """Oracle: compose the DH transforms symbolically and evaluate exactly."""
    sympy = pytest.importorskip("sympy")
    q_syms = sympy.symbols("qa qb qc")
    qv = {q_syms[0]: sympy.rad(50), q_syms[1]: sympy.rad(27), q_syms[2]: sympy.rad(-45)}

    def dh(theta, d, a, alpha):
        ct, st = sympy.cos(theta), sympy.sin(theta)
        ca, sa = sympy.cos(alpha), sympy.sin(alpha)
        return sympy.Matrix(
            [
                [ct, -st * ca, st * sa, a * ct],
                [st, ct * ca, -ct * sa, a * st],
                [0, sa, ca, d],
                [0, 0, 0, 1],
            ]
        )

    base = sympy.eye(4)
    base[2, 3] = sympy.Rational(145, 100)
    chain = (
        base
        * dh(q_syms[0], 0, 0, -sympy.pi / 2)
        * dh(q_syms[1], 0, 0, 0)
        * dh(sympy.pi / 2, 0, 0, sympy.pi / 2)
        * dh(q_syms[2], 0, 0, 0)
    )
    expected = np.array(
        [float(sympy.N(chain[i, 3].subs(qv), 30)) for i in range(3)]
    )
    frames = forward_kinematics(model, TARGET)
    hand = frames[-1, :3, 3]
    assert np.linalg.norm(hand - expected) < 1e-9


def test_fk_rejects_wrong_dimension(model):
    with pytest.raises(ValidationError):
        forward_kinematics(model, np.zeros(model.dof + 1))
    with pytest.raises(ValidationError):
        forward_kinematics(model, np.array([np.nan, 0.0, 0.0]))


def test_pendulum_closed_form():
    model = make_pendulum()
    m, l = PENDULUM_MASS, PENDULUM_LENGTH
    for q in (-1.2, -0.3, 0.0, 0.7, 2.1):
        terms = dynamics_terms(model, [q], [0.0])
        np.testing.assert_allclose(terms.D, [[m * l**2]], rtol=1e-12)
        np.testing.assert_allclose(terms.g, [m * 9.81 * l * np.sin(q)], rtol=1e-9, atol=1e-12)


def test_coriolis_vanishes_at_rest(model, rng):
    for _ in range(20):
        q = rng.uniform(-np.pi, np.pi, model.dof)
        terms = dynamics_terms(model, q, np.zeros(model.dof))
        assert np.linalg.norm(terms.C) == 0.0


def test_inertia_spd(model, rng):
    for _ in range(100):
        q = rng.uniform(-np.pi, np.pi, model.dof)
        D = dynamics_terms(model, q, np.zeros(model.dof)).D
        assert np.linalg.norm(D - D.T) < 1e-12
        np.linalg.cholesky(D)  # raises if not positive definite


def test_kinetic_energy_matches_body_twists(scenario, rng):
    """Oracle: kinetic energy from finite-difference body twists."""
    model = scenario.model
    h = 1e-6
    for q, qdot, _ in random_states(scenario, rng, 100):
        D = dynamics_terms(model, q, qdot).D
        ke_joint = 0.5 * qdot @ D @ qdot

        fp = forward_kinematics(model, q + h * qdot)
        fm = forward_kinematics(model, q - h * qdot)
        f0 = forward_kinematics(model, q)
        ke_bodies = 0.0
        for body in model.inertias:
            R0 = f0[body.frame, :3, :3]
            cp = fp[body.frame, :3, :3] @ body.com + fp[body.frame, :3, 3]
            cm = fm[body.frame, :3, :3] @ body.com + fm[body.frame, :3, 3]
            v = (cp - cm) / (2 * h)
            Rdot = (fp[body.frame, :3, :3] - fm[body.frame, :3, :3]) / (2 * h)
            Wx = Rdot @ R0.T
            omega = np.array([Wx[2, 1] - Wx[1, 2], Wx[0, 2] - Wx[2, 0], Wx[1, 0] - Wx[0, 1]]) / 2
            Iw = R0 @ body.inertia @ R0.T
            ke_bodies += 0.5 * body.mass * v @ v + 0.5 * omega @ Iw @ omega
        assert abs(ke_joint - ke_bodies) <= 1e-6 * max(ke_joint, 1e-12)


def test_skew_symmetry_of_Ddot_minus_2C(scenario, rng):
    model = scenario.model
    h = 1e-6
    for q, qdot, _ in random_states(scenario, rng, 100):
        C = dynamics_terms(model, q, qdot).C
        Dp = dynamics_terms(model, q + h * qdot, qdot).D
        Dm = dynamics_terms(model, q - h * qdot, qdot).D
        M = (Dp - Dm) / (2 * h) - 2.0 * C
        assert np.linalg.norm(M + M.T) < 1e-8


def test_gravity_matches_potential_gradient(scenario, rng):
    model = scenario.model
    h = 1e-6
    for q, _, _ in random_states(scenario, rng, 100):
        g = dynamics_terms(model, q, np.zeros(model.dof)).g
        grad = np.empty(model.dof)
        for k in range(model.dof):
            qp, qm = q.copy(), q.copy()
            qp[k] += h
            qm[k] -= h
            grad[k] = (potential_energy(model, qp) - potential_energy(model, qm)) / (2 * h)
        assert np.linalg.norm(grad - g) <= 1e-6 * max(np.linalg.norm(g), 1e-9)


def test_potential_energy_zero_without_gravity():
    model = make_pendulum()
    from dataclasses import replace

    weightless = replace(model, gravity=np.zeros(3))
    for q in np.linspace(-2, 2, 7):
        assert potential_energy(weightless, [q]) == 0.0


def test_potential_energy_pendulum_convention():
    model = make_pendulum()
    m, l = PENDULUM_MASS, PENDULUM_LENGTH
    for q in (0.0, 0.4, 1.3):
        # com sits at z = -l cos(q); V = -m * dot(gravity, com)
        assert abs(potential_energy(model, [q]) - (-m * 9.81 * l * np.cos(q))) < 1e-12


def test_equilibrium_torque_freezes_acceleration(scenario, rng):
    model = scenario.model
    for q, qdot, _ in random_states(scenario, rng, 20):
        terms = dynamics_terms(model, q, qdot)
        tau = terms.C @ qdot + terms.g
        qdd = forward_dynamics(model, q, qdot, tau)
        assert np.linalg.norm(qdd) < 1e-10


def test_pendulum_rest_is_equilibrium():
    model = make_pendulum()
    qdd = forward_dynamics(model, [0.0], [0.0], [0.0])
    np.testing.assert_allclose(qdd, [0.0], atol=1e-12)


def test_forward_dynamics_residual(scenario, rng):
    model = scenario.model
    for q, qdot, _ in random_states(scenario, rng, 100):
        tau = rng.uniform(-8.0, 8.0, model.dof)
        terms = dynamics_terms(model, q, qdot)
        qdd = forward_dynamics(model, q, qdot, tau)
        assert np.linalg.norm(terms.D @ qdd + terms.C @ qdot + terms.g - tau) < 1e-9


def test_singular_inertia_faults():
    # massless model: D is identically zero
    model = LinkageModel(
        dh_rows=(DHRow(0.0, 0.0, 0.0, 0.0, "revolute"),),
        inertias=(LinkInertia(frame=1, mass=0.0, com=np.zeros(3), inertia=np.zeros((3, 3))),),
    )
    with pytest.raises(NumericalFault):
        forward_dynamics(model, [0.1], [0.0], [0.0])


def test_model_validation():
    with pytest.raises(ValidationError):
        DHRow(0.0, 0.0, 0.0, 0.0, "prismatic")
    with pytest.raises(ValidationError):
        LinkInertia(frame=0, mass=-1.0, com=np.zeros(3), inertia=np.eye(3))
    with pytest.raises(ValidationError):
        LinkInertia(frame=0, mass=1.0, com=np.zeros(3), inertia=np.diag([1.0, 0.1, 0.1]))
    with pytest.raises(ValidationError):
        LinkageModel(
            dh_rows=(DHRow(0.0, 0.0, 0.0, 0.0, "revolute"),),
            inertias=(LinkInertia(frame=5, mass=1.0, com=np.zeros(3), inertia=np.eye(3) * 0.1),),
        )
