"""Backstepping regulation of muscle-driven linkages.

The joint torque is treated as a virtual control: an inverse-dynamics
feedback law Psi shapes the tracking-error dynamics, the gap w between the
realized muscle torque and Psi is driven to zero through a prescribed
torque rate, and the muscle contraction rates realizing that torque rate
are picked as the minimum-norm least-squares (pseudoinverse) solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFault, ValidationError
from .linkage import DynamicsTerms, LinkageModel, dynamics_terms

BACKWARD_DIFFERENCE = "backward-difference"
DIRECTIONAL_ANALYTIC = "directional-analytic"

_PSI_DOT_MODES = (BACKWARD_DIFFERENCE, DIRECTIONAL_ANALYTIC)


def _as_spd(M, size, name):
    """Validate a symmetric positive definite matrix (Cholesky check)."""
    M = np.asarray(M, dtype=float)
    if M.shape != (size, size):
        raise ValidationError(f"{name} must be {size}x{size}, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-10, rtol=0.0):
        raise ValidationError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{name} must be positive definite") from None
    return M


@dataclass(frozen=True)
class ControllerConfig:
    """Gains and numerical settings of the backstepping controller.

    ``kp`` and ``kd`` are the diagonals of the (diagonal, positive) joint
    gain matrices; ``Q``, ``R`` and ``gamma`` are full SPD matrices.
    """

    kp: np.ndarray
    kd: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    gamma: np.ndarray
    pinv_rel_tol: float = 1e-10
    psi_dot_mode: str = BACKWARD_DIFFERENCE
    u_limit: float | None = None

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=float)
        kd = np.asarray(self.kd, dtype=float)
        if kp.ndim != 1 or kp.shape != kd.shape:
            raise ValidationError(f"kp and kd must be equal-length vectors, got {kp.shape}, {kd.shape}")
        if np.any(kp <= 0) or np.any(kd <= 0):
            raise ValidationError("kp and kd entries must be positive")
        n = kp.size
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)
        object.__setattr__(self, "Q", _as_spd(self.Q, 2 * n, "Q"))
        object.__setattr__(self, "R", _as_spd(self.R, n, "R"))
        object.__setattr__(self, "gamma", _as_spd(self.gamma, n, "gamma"))
        if not 0 < self.pinv_rel_tol < 1:
            raise ValidationError(f"pinv_rel_tol must be in (0, 1), got {self.pinv_rel_tol}")
        if self.psi_dot_mode not in _PSI_DOT_MODES:
            raise ValidationError(f"psi_dot_mode must be one of {_PSI_DOT_MODES}")
        if self.u_limit is not None and self.u_limit <= 0:
            raise ValidationError("u_limit must be positive when set")

    @property
    def dof(self) -> int:
        return int(self.kp.size)


@dataclass(frozen=True)
class ErrorState:
    """Stacked tracking error (position error, velocity error)."""

    e: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        if e.ndim != 1 or e.size % 2:
            raise ValidationError(f"error vector must have even length, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValidationError("error vector contains non-finite values")
        object.__setattr__(self, "e", e)

    @property
    def q_err(self) -> np.ndarray:
        return self.e[: self.e.size // 2]

    @property
    def qd_err(self) -> np.ndarray:
        return self.e[self.e.size // 2 :]


@dataclass
class ControllerInternals:
    """Per-step controller quantities kept for logging and diagnostics."""

    Psi: np.ndarray
    Psi_dot: np.ndarray
    w: np.ndarray
    zeta_dot: np.ndarray
    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    V: float
    V_dot: float
    U: np.ndarray
    tau_m: np.ndarray = None
    lengths: np.ndarray = None
    forces: np.ndarray = None


def tracking_error(q, qdot, q_des, qdot_des) -> ErrorState:
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    q_des = np.asarray(q_des, dtype=float)
    qdot_des = np.asarray(qdot_des, dtype=float)
    if not (q.shape == qdot.shape == q_des.shape == qdot_des.shape):
        raise ValidationError("tracking_error arguments must share one shape")
    return ErrorState(np.concatenate([q - q_des, qdot - qdot_des]))


def synthetic_acceleration(e: ErrorState, qddot_des, cfg: ControllerConfig) -> np.ndarray:
    """a = qdd_des - Kd * velocity error - Kp * position error."""
    return np.asarray(qddot_des, dtype=float) - cfg.kd * e.qd_err - cfg.kp * e.q_err


def synthetic_feedback(terms: DynamicsTerms, e: ErrorState, qddot_des, cfg: ControllerConfig,
                       qdot_des=None) -> np.ndarray:
    """Inverse-dynamics feedback torque Psi = D a + C qd + g."""
    a = synthetic_acceleration(e, qddot_des, cfg)
    qdot = e.qd_err if qdot_des is None else e.qd_err + np.asarray(qdot_des, dtype=float)
    return terms.D @ a + terms.C @ qdot + terms.g


def error_system(D: np.ndarray, cfg: ControllerConfig):
    """Error dynamics pair: constant A from the gains, B = [0; D^-1]."""
    n = cfg.dof
    if D.shape != (n, n):
        raise ValidationError(f"D must be {n}x{n}, got {D.shape}")
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -np.diag(cfg.kp)
    A[n:, n:] = -np.diag(cfg.kd)
    try:
        Dinv = np.linalg.inv(D)
    except np.linalg.LinAlgError:
        raise NumericalFault("inertia matrix singular while forming the error system") from None
    B = np.zeros((2 * n, n))
    B[n:, :] = Dinv
    return A, B


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Unique SPD P with A^T P + P A = -Q, by the Kronecker-vectorized solve.

    A must be Hurwitz and Q symmetric positive definite.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    nn = A.shape[0]
    if A.shape != (nn, nn) or Q.shape != (nn, nn):
        raise ValidationError(f"A and Q must be square and equal-sized, got {A.shape}, {Q.shape}")
    eigs = np.linalg.eigvals(A)
    worst = eigs[np.argmax(eigs.real)]
    if worst.real >= 0:
        raise NumericalFault(f"A is not Hurwitz: eigenvalue {worst} has non-negative real part")
    ident = np.eye(nn)
    M = np.kron(ident, A.T) + np.kron(A.T, ident)
    p = np.linalg.solve(M, -Q.reshape(-1, order="F"))
    P = p.reshape(nn, nn, order="F")
    return 0.5 * (P + P.T)


def zeta_dot(psi_dot, w, e: ErrorState, B, P, cfg: ControllerConfig) -> np.ndarray:
    """Prescribed torque rate: Psi_dot - R^-1 (Gamma w + B^T P e)."""
    rhs = cfg.gamma @ w + B.T @ (P @ e.e)
    return psi_dot - np.linalg.solve(cfg.R, rhs)


def control_input(zdot, dtau_dq, dtau_dS, qdot, Ldot, rel_tol=1e-10) -> np.ndarray:
    """Muscle contraction rates realizing the torque rate ``zdot``.

    Minimum-norm least-squares solution of
    (dtau/dS) U = zdot - (dtau/dq) qd - (dtau/dS) Ld
    through an SVD pseudoinverse; singular values below ``rel_tol`` times
    the largest are discarded.
    """
    J = np.asarray(dtau_dS, dtype=float)
    rhs = np.asarray(zdot, dtype=float) - dtau_dq @ qdot - J @ Ldot
    u_left, s, vt = np.linalg.svd(J, full_matrices=False)
    if s.size == 0 or not np.isfinite(s[0]):
        raise NumericalFault("control authority lost: torque-length Jacobian is empty or invalid")
    keep = s > rel_tol * s[0]
    if not np.any(keep):
        raise NumericalFault(
            "control authority lost: all singular values of dtau/dS below threshold"
        )
    coeff = (u_left[:, keep].T @ rhs) / s[keep]
    return vt[keep].T @ coeff


def lyapunov_diagnostics(e: ErrorState, w, P, cfg: ControllerConfig, zdot, psi_dot, B):
    """(V, Vdot): V = e^T P e + w^T R w and its prescribed derivative."""
    V = float(e.e @ P @ e.e + w @ cfg.R @ w)
    V_dot = float(-e.e @ cfg.Q @ e.e + 2.0 * w @ (B.T @ (P @ e.e) + cfg.R @ (zdot - psi_dot)))
    return V, V_dot


class PsiDotEstimator:
    """Backward-difference estimate of Psi_dot with explicit history.

    Before the first sample the estimate is a flagged zero vector
    (``primed`` is False); update once per integrator step.
    """

    def __init__(self, dt: float):
        if dt <= 0:
            raise ValidationError(f"dt must be > 0, got {dt}")
        self.dt = dt
        self._prev = None

    @property
    def primed(self) -> bool:
        return self._prev is not None

    def update(self, psi) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        if self._prev is None:
            out = np.zeros_like(psi)
        else:
            out = (psi - self._prev) / self.dt
        self._prev = psi.copy()
        return out


def psi_dot_analytic(model: LinkageModel, cfg: ControllerConfig, e: ErrorState,
                     qdot, qddot, q, qddot_des, h: float = 1e-6) -> np.ndarray:
    """Directional-analytic Psi_dot for set-point references.

    Psi_dot = Ddot a + D adot + Cdot qd + C qdd + gdot, with Ddot, Cdot and
    gdot as central directional differences along (qd, qdd) and
    adot = -Kd * velocity-error rate - Kp * velocity error (constant
    reference acceleration assumed).
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    terms = dynamics_terms(model, q, qdot)
    plus = dynamics_terms(model, q + h * qdot, qdot + h * qddot)
    minus = dynamics_terms(model, q - h * qdot, qdot - h * qddot)
    D_dot = (plus.D - minus.D) / (2.0 * h)
    C_dot = (plus.C - minus.C) / (2.0 * h)
    g_dot = (plus.g - minus.g) / (2.0 * h)
    a = synthetic_acceleration(e, qddot_des, cfg)
    a_dot = -cfg.kd * qddot - cfg.kp * e.qd_err
    return D_dot @ a + terms.D @ a_dot + C_dot @ qdot + terms.C @ qddot + g_dot
