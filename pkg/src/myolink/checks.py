"""Randomized invariant suite behind the ``check`` CLI subcommand.

Every check samples states around the scenario's target pose and verifies
one structural property against an independent route (finite differences,
algebraic identities, residuals). Failures carry the module name, the
invariant and the offending sampled state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import control_input, solve_lyapunov
from .linkage import dynamics_terms, forward_dynamics, potential_energy
from .muscle import (
    MuscleState,
    muscle_forces,
    muscle_jacobian,
    muscle_lengths,
    muscle_torques,
    tendon_force,
    torque_jacobians,
)
from .simulate import Scenario


@dataclass
class CheckFailure:
    module: str
    invariant: str
    state: str

    def __str__(self):
        return f"[{self.module}] {self.invariant} at {self.state}"


def _sample(scenario: Scenario, rng):
    q = scenario.q_target + rng.uniform(-0.7, 0.7, scenario.model.dof)
    qdot = rng.uniform(-3.0, 3.0, scenario.model.dof)
    S = scenario.muscles.slack_lengths * rng.uniform(0.97, 1.06, len(scenario.muscles))
    return q, qdot, S


def _fmt(q, qdot=None, S=None):
    parts = [f"q={np.array2string(q, precision=4)}"]
    if qdot is not None:
        parts.append(f"qdot={np.array2string(qdot, precision=4)}")
    if S is not None:
        parts.append(f"S={np.array2string(S, precision=5)}")
    return " ".join(parts)


def check_dynamics(scenario: Scenario, samples: int, rng) -> list[CheckFailure]:
    model = scenario.effective_model()
    fails = []
    h = 1e-6
    for _ in range(samples):
        q, qdot, _ = _sample(scenario, rng)
        terms = dynamics_terms(model, q, qdot)
        if np.linalg.norm(terms.D - terms.D.T) > 1e-12:
            fails.append(CheckFailure("dynamics", "D symmetric to 1e-12", _fmt(q)))
        try:
            np.linalg.cholesky(terms.D)
        except np.linalg.LinAlgError:
            fails.append(CheckFailure("dynamics", "D positive definite (Cholesky)", _fmt(q)))
        Dp = dynamics_terms(model, q + h * qdot, qdot).D
        Dm = dynamics_terms(model, q - h * qdot, qdot).D
        M = (Dp - Dm) / (2 * h) - 2.0 * terms.C
        if np.linalg.norm(M + M.T) > 1e-8:
            fails.append(CheckFailure("dynamics", "Ddot - 2C skew-symmetric to 1e-8", _fmt(q, qdot)))
        grad = np.empty(model.dof)
        for k in range(model.dof):
            qp, qm = q.copy(), q.copy()
            qp[k] += h
            qm[k] -= h
            grad[k] = (potential_energy(model, qp) - potential_energy(model, qm)) / (2 * h)
        scale = max(np.linalg.norm(terms.g), 1e-9)
        if np.linalg.norm(grad - terms.g) / scale > 1e-6:
            fails.append(CheckFailure("dynamics", "g equals grad of potential energy (rel 1e-6)", _fmt(q)))
        tau = rng.uniform(-5.0, 5.0, model.dof)
        qdd = forward_dynamics(model, q, qdot, tau)
        residual = terms.D @ qdd + terms.C @ qdot + terms.g - tau
        if np.linalg.norm(residual) > 1e-9:
            fails.append(CheckFailure("dynamics", "forward-dynamics residual < 1e-9", _fmt(q, qdot)))
    return fails


def check_muscles(scenario: Scenario, samples: int, rng) -> list[CheckFailure]:
    model = scenario.effective_model()
    muscles = scenario.muscles
    fails = []
    for _ in range(samples):
        q, qdot, S = _sample(scenario, rng)
        state = MuscleState(S)
        J = muscle_jacobian(model, muscles, q)
        phi = muscle_forces(muscles, S)
        tau_cross = muscle_torques(model, muscles, q, state)
        tau_vw = -J.T @ phi
        scale = max(np.linalg.norm(tau_vw), 1e-9)
        if np.linalg.norm(tau_cross - tau_vw) / scale > 1e-6:
            fails.append(CheckFailure("muscle", "cross-product torque == virtual-work torque (rel 1e-6)", _fmt(q, S=S)))
        dtau_dq, dtau_dS = torque_jacobians(model, muscles, q, state)
        # independent FD step, distinct from the one inside the kernels
        h = 5e-6
        fd_q = np.empty_like(dtau_dq)
        for k in range(model.dof):
            qp, qm = q.copy(), q.copy()
            qp[k] += h
            qm[k] -= h
            fd_q[:, k] = (muscle_torques(model, muscles, qp, state)
                          - muscle_torques(model, muscles, qm, state)) / (2 * h)
        scale = max(np.linalg.norm(fd_q), 1e-9)
        if np.linalg.norm(dtau_dq - fd_q) / scale > 1e-5:
            fails.append(CheckFailure("muscle", "dtau/dq matches central differences (rel 1e-5)", _fmt(q, S=S)))
        fd_s = np.empty_like(dtau_dS)
        for j in range(len(muscles)):
            Sp, Sm = S.copy(), S.copy()
            hs = 1e-8 * S[j]
            Sp[j] += hs
            Sm[j] -= hs
            fd_s[:, j] = (muscle_torques(model, muscles, q, MuscleState(Sp))
                          - muscle_torques(model, muscles, q, MuscleState(Sm))) / (2 * hs)
        scale = max(np.linalg.norm(fd_s), 1e-9)
        if np.linalg.norm(dtau_dS - fd_s) / scale > 1e-5:
            fails.append(CheckFailure("muscle", "dtau/dS matches central differences (rel 1e-5)", _fmt(q, S=S)))
        lengths = muscle_lengths(model, muscles, q)
        if np.any(lengths <= 0):
            fails.append(CheckFailure("muscle", "path lengths positive", _fmt(q)))
    # tendon C1 continuity at the toe-linear junction; the probe offset must
    # sit well inside the 1e-9-of-stiffness budget once mapped to strain
    for j, muscle in enumerate(muscles.muscles):
        curve = muscle.tendon
        s_junction = curve.slack_length * (1.0 + curve.eps_toe)
        _, below = tendon_force(curve, s_junction * (1.0 - 1e-12))
        _, above = tendon_force(curve, s_junction * (1.0 + 1e-12))
        if abs(above - below) > 1e-9 * curve.linear_stiffness:
            fails.append(CheckFailure("muscle", "tendon slope continuous at toe junction", f"muscle {muscle.name}"))
    return fails


def check_controller(scenario: Scenario, samples: int, rng) -> list[CheckFailure]:
    fails = []
    n = scenario.model.dof
    # Lyapunov solver residuals on random Hurwitz instances
    for _ in range(max(samples // 2, 50)):
        size = 2 * n
        G = rng.standard_normal((size, size))
        shift = max(np.linalg.eigvals(G).real.max(), 0.0) + rng.uniform(0.5, 2.0)
        A = G - shift * np.eye(size)
        M = rng.standard_normal((size, size))
        Q = M @ M.T + 0.1 * np.eye(size)
        P = solve_lyapunov(A, Q)
        residual = np.linalg.norm(A.T @ P + P @ A + Q)
        if residual > 1e-10 * np.linalg.norm(Q):
            fails.append(CheckFailure("controller", "Lyapunov residual < 1e-10 ||Q||", f"shift={shift:.3f}"))
        if np.linalg.norm(P - P.T) > 1e-12:
            fails.append(CheckFailure("controller", "P symmetric", f"shift={shift:.3f}"))
    # pseudoinverse optimality on random full-rank instances
    m = len(scenario.muscles)
    for _ in range(samples):
        J = rng.standard_normal((n, m))
        zdot = rng.standard_normal(n)
        U = control_input(zdot, np.zeros((n, n)), J, np.zeros(n), np.zeros(m))
        base_res = np.linalg.norm(J @ U - zdot)
        for _ in range(20):
            delta = 1e-3 * rng.standard_normal(m)
            if np.linalg.norm(J @ (U + delta) - zdot) < base_res - 1e-12:
                fails.append(CheckFailure("controller", "least-squares residual minimal", "random J"))
                break
        # null-space component of the minimum-norm solution
        u_left, s, vt = np.linalg.svd(J, full_matrices=False)
        row_space = vt.T @ (vt @ U)
        if np.linalg.norm(U - row_space) > 1e-10:
            fails.append(CheckFailure("controller", "null-space component < 1e-10", "random J"))
    return fails


def run_invariant_suite(scenario: Scenario, samples: int = 100, seed: int = 0) -> list[CheckFailure]:
    rng = np.random.default_rng(seed)
    failures = []
    failures += check_dynamics(scenario, samples, rng)
    failures += check_muscles(scenario, samples, rng)
    failures += check_controller(scenario, samples, rng)
    return failures
