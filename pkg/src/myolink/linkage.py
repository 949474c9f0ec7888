"""Denavit-Hartenberg linkages: forward kinematics and rigid-body dynamics.

A :class:`LinkageModel` describes a serial chain through DH rows (revolute
rows carry the joint variables, fixed rows are constant transforms) plus the
inertial bodies attached to its frames. All angles are radians; degrees only
exist at the scenario-file boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kern
from .errors import NumericalFault, ValidationError

REVOLUTE = "revolute"
FIXED = "fixed"

#: Condition number above which the inertia matrix is treated as singular.
SINGULAR_COND = 1e12


def _as_vec(x, size, name):
    a = np.asarray(x, dtype=float)
    if a.shape != (size,):
        raise ValidationError(f"{name} must have shape ({size},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite values")
    return a


def rpy_matrix(rpy):
    """Rotation from roll-pitch-yaw (x, then y, then z axis)."""
    cr, sr = np.cos(rpy[0]), np.sin(rpy[0])
    cp, sp = np.cos(rpy[1]), np.sin(rpy[1])
    cy, sy = np.cos(rpy[2]), np.sin(rpy[2])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class DHRow:
    """One DH row (theta, d, a, alpha); revolute rows add q to theta."""

    theta_offset: float
    d: float
    a: float
    alpha: float
    kind: str = REVOLUTE

    def __post_init__(self):
        if self.kind not in (REVOLUTE, FIXED):
            raise ValidationError(f"unknown DH row kind {self.kind!r}")
        for name in ("theta_offset", "d", "a", "alpha"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"DH row field {name} is not finite")


@dataclass(frozen=True)
class LinkInertia:
    """Rigid body attached to a frame: mass, local com, inertia about com."""

    frame: int
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "com", _as_vec(self.com, 3, "com"))
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise ValidationError(f"inertia must be 3x3, got {inertia.shape}")
        object.__setattr__(self, "inertia", inertia)
        if self.mass < 0:
            raise ValidationError(f"mass must be >= 0, got {self.mass}")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ValidationError("inertia tensor must be symmetric")
        ev = np.sort(np.linalg.eigvalsh(0.5 * (inertia + inertia.T)))
        if ev[0] < -1e-12:
            raise ValidationError(f"inertia tensor has negative principal moment {ev[0]}")
        if ev[2] > ev[0] + ev[1] + 1e-12:
            raise ValidationError("inertia principal moments violate the triangle inequalities")


@dataclass(frozen=True)
class DynamicsTerms:
    """Joint-space rigid-body terms: D q'' + C q' + g = tau."""

    D: np.ndarray
    C: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class LinkageModel:
    """Immutable serial chain: base pose, DH rows, bodies, gravity."""

    dh_rows: tuple[DHRow, ...]
    inertias: tuple[LinkInertia, ...]
    base_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    def __post_init__(self):
        object.__setattr__(self, "dh_rows", tuple(self.dh_rows))
        object.__setattr__(self, "inertias", tuple(self.inertias))
        object.__setattr__(self, "base_translation", _as_vec(self.base_translation, 3, "base_translation"))
        object.__setattr__(self, "base_rpy", _as_vec(self.base_rpy, 3, "base_rpy"))
        object.__setattr__(self, "gravity", _as_vec(self.gravity, 3, "gravity"))
        if not self.dh_rows:
            raise ValidationError("model needs at least one DH row")
        nframes = len(self.dh_rows) + 1
        for body in self.inertias:
            if not 0 <= body.frame < nframes:
                raise ValidationError(
                    f"inertia references frame {body.frame}, model has frames 0..{nframes - 1}"
                )
        base = np.eye(4)
        base[:3, :3] = rpy_matrix(self.base_rpy)
        base[:3, 3] = self.base_translation
        dh = np.array(
            [
                [r.theta_offset, r.d, r.a, r.alpha, 1.0 if r.kind == REVOLUTE else 0.0]
                for r in self.dh_rows
            ]
        )
        var_rows = np.array([i for i, r in enumerate(self.dh_rows) if r.kind == REVOLUTE], dtype=np.int64)
        body_frame = np.array([b.frame for b in self.inertias], dtype=np.int64)
        mass = np.array([b.mass for b in self.inertias])
        com = np.array([b.com for b in self.inertias]).reshape(len(self.inertias), 3)
        inertia = np.array([b.inertia for b in self.inertias]).reshape(len(self.inertias), 3, 3)
        for a in (base, dh, var_rows, body_frame, mass, com, inertia):
            a.setflags(write=False)
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_dh", dh)
        object.__setattr__(self, "_var_rows", var_rows)
        object.__setattr__(self, "_bodies", (body_frame, mass, com, inertia))

    @property
    def dof(self) -> int:
        return int(self._var_rows.size)

    @property
    def nframes(self) -> int:
        return len(self.dh_rows) + 1

    def packed(self):
        """Array bundle consumed by the kernel backends."""
        body_frame, mass, com, inertia = self._bodies
        return (self._base, self._dh, self._var_rows, body_frame, mass, com, inertia, self.gravity)

    def _check_q(self, q, name="q"):
        return _as_vec(q, self.dof, name)


def forward_kinematics(model: LinkageModel, q) -> np.ndarray:
    """World pose of every frame (base included), shape (nframes, 4, 4)."""
    q = model._check_q(q)
    return _kern.impl().fk_frames(model._base, model._dh, q)


def joint_axes(model: LinkageModel, q):
    """World rotation axis and center of each revolute joint at q."""
    frames = forward_kinematics(model, q)
    return frames[model._var_rows, :3, 2], frames[model._var_rows, :3, 3]


def dynamics_terms(model: LinkageModel, q, qdot) -> DynamicsTerms:
    """Inertia matrix, Christoffel Coriolis matrix and gravity vector."""
    if model.dof == 0:
        raise ValidationError("model has no degrees of freedom; dynamics are undefined")
    q = model._check_q(q)
    qdot = model._check_q(qdot, "qdot")
    D, C, g = _kern.impl().dynamics_terms(*model.packed(), q, qdot)
    return DynamicsTerms(D=D, C=C, g=g)


def potential_energy(model: LinkageModel, q) -> float:
    """Gravitational potential: sum over bodies of -m * dot(gravity, com)."""
    q = model._check_q(q)
    base, dh, _, body_frame, mass, com, _, gravity = model.packed()
    return _kern.impl().potential_energy(base, dh, body_frame, mass, com, gravity, q)


def gravity_vector(model: LinkageModel, q) -> np.ndarray:
    q = model._check_q(q)
    return dynamics_terms(model, q, np.zeros(model.dof)).g


def forward_dynamics(model: LinkageModel, q, qdot, tau) -> np.ndarray:
    """Solve D qdd = tau - C qd - g for the joint accelerations.

    Solved as a linear system; an explicit inverse is never formed. A
    condition number beyond ``SINGULAR_COND`` raises a fault.
    """
    q = model._check_q(q)
    qdot = model._check_q(qdot, "qdot")
    tau = _as_vec(tau, model.dof, "tau")
    terms = dynamics_terms(model, q, qdot)
    return solve_forward_dynamics(terms, qdot, tau)


def solve_forward_dynamics(terms: DynamicsTerms, qdot, tau) -> np.ndarray:
    """Forward dynamics from precomputed terms (shared with the simulator)."""
    ev = np.linalg.eigvalsh(terms.D)
    if ev[0] <= 0.0 or ev[-1] / ev[0] > SINGULAR_COND:
        raise NumericalFault(
            f"inertia matrix numerically singular (eigenvalues {ev.min():.3e}..{ev.max():.3e})"
        )
    return np.linalg.solve(terms.D, tau - terms.C @ qdot - terms.g)
