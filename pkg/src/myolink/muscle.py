"""Straight-line muscles over a linkage: geometry, tendon law, joint torques.

Each muscle runs point-to-point between two frames of a
:class:`~myolink.linkage.LinkageModel`. Force is transmitted by the series
elastic element only; its length ``S`` is the muscle state and the tendon
law maps its strain to tension. Torques come from the cross-product form
(moment arm x force, projected on each joint axis); the virtual-work form
-(dL/dq)^T phi is kept as the independent cross-check used in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kern
from .errors import ValidationError
from .linkage import LinkageModel, _as_vec


@dataclass(frozen=True)
class MuscleAttachment:
    """Anchor point: frame index plus coordinates in that frame."""

    frame: int
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _as_vec(self.point, 3, "attachment point"))


@dataclass(frozen=True)
class TendonCurve:
    """Series-element force law parameters.

    ``slack_length`` is the zero-force length; strain ``eps_ref`` carries
    exactly ``f_max``; the quadratic toe region ends at ``eps_toe``.
    """

    slack_length: float
    f_max: float
    eps_ref: float = 0.033
    eps_toe: float = 0.01

    def __post_init__(self):
        if self.slack_length <= 0:
            raise ValidationError(f"slack_length must be > 0, got {self.slack_length}")
        if self.f_max <= 0:
            raise ValidationError(f"f_max must be > 0, got {self.f_max}")
        if not 0 < self.eps_toe < self.eps_ref:
            raise ValidationError(
                f"need 0 < eps_toe < eps_ref, got eps_toe={self.eps_toe}, eps_ref={self.eps_ref}"
            )

    @property
    def linear_stiffness(self) -> float:
        """Force per unit length on the linear branch (N/m)."""
        return self.f_max / (self.eps_ref - 0.5 * self.eps_toe) / self.slack_length


@dataclass(frozen=True)
class Muscle:
    name: str
    origin: MuscleAttachment
    insertion: MuscleAttachment
    tendon: TendonCurve

    def __post_init__(self):
        if self.origin.frame == self.insertion.frame:
            raise ValidationError(
                f"muscle {self.name!r}: origin and insertion on the same frame "
                f"({self.origin.frame}) produce no torque"
            )


@dataclass(frozen=True)
class MuscleSet:
    """Immutable muscle collection packed for the kernels."""

    muscles: tuple[Muscle, ...]

    def __post_init__(self):
        object.__setattr__(self, "muscles", tuple(self.muscles))
        if not self.muscles:
            raise ValidationError("muscle set is empty")
        o_frame = np.array([m.origin.frame for m in self.muscles], dtype=np.int64)
        i_frame = np.array([m.insertion.frame for m in self.muscles], dtype=np.int64)
        o_pt = np.array([m.origin.point for m in self.muscles])
        i_pt = np.array([m.insertion.point for m in self.muscles])
        slack = np.array([m.tendon.slack_length for m in self.muscles])
        fmax = np.array([m.tendon.f_max for m in self.muscles])
        eps_ref = np.array([m.tendon.eps_ref for m in self.muscles])
        eps_toe = np.array([m.tendon.eps_toe for m in self.muscles])
        for a in (o_frame, i_frame, o_pt, i_pt, slack, fmax, eps_ref, eps_toe):
            a.setflags(write=False)
        object.__setattr__(self, "_geom", (o_frame, o_pt, i_frame, i_pt))
        object.__setattr__(self, "_tendon", (slack, fmax, eps_ref, eps_toe))

    def __len__(self) -> int:
        return len(self.muscles)

    @property
    def names(self):
        return [m.name for m in self.muscles]

    @property
    def slack_lengths(self) -> np.ndarray:
        return self._tendon[0]

    def validate_frames(self, model: LinkageModel):
        for m in self.muscles:
            for att in (m.origin, m.insertion):
                if not 0 <= att.frame < model.nframes:
                    raise ValidationError(
                        f"muscle {m.name!r} references frame {att.frame}, "
                        f"model has frames 0..{model.nframes - 1}"
                    )


@dataclass(frozen=True)
class MuscleState:
    """Series-element lengths, finite and positive."""

    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 1:
            raise ValidationError(f"S must be a vector, got shape {S.shape}")
        if not np.all(np.isfinite(S)) or np.any(S <= 0):
            raise ValidationError("series-element lengths must be finite and > 0")
        object.__setattr__(self, "S", S)


def _check_S(muscles: MuscleSet, S):
    S = np.asarray(S, dtype=float)
    if S.shape != (len(muscles),):
        raise ValidationError(f"S must have shape ({len(muscles)},), got {S.shape}")
    if not np.all(np.isfinite(S)) or np.any(S <= 0):
        raise ValidationError("series-element lengths must be finite and > 0")
    return S


def tendon_force(curve: TendonCurve, S: float):
    """Scalar tendon force and slope dphi/dS at series length S."""
    if S <= 0:
        raise ValidationError(f"series-element length must be > 0, got {S}")
    phi, dphi = _kern.impl().tendon_forces(
        np.array([curve.slack_length]),
        np.array([curve.f_max]),
        np.array([curve.eps_ref]),
        np.array([curve.eps_toe]),
        np.array([float(S)]),
    )
    return float(phi[0]), float(dphi[0])


def muscle_lengths(model: LinkageModel, muscles: MuscleSet, q) -> np.ndarray:
    q = model._check_q(q)
    dummy = 2.0 * muscles.slack_lengths  # lengths need no real S
    L, _, _, _ = _kern.impl().muscle_eval(
        model._base, model._dh, model._var_rows, *muscles._geom, *muscles._tendon, q, dummy
    )
    return L


def muscle_jacobian(model: LinkageModel, muscles: MuscleSet, q) -> np.ndarray:
    """dL/dq, shape (m, n)."""
    q = model._check_q(q)
    dummy = 2.0 * muscles.slack_lengths
    _, J, _, _ = _kern.impl().muscle_eval(
        model._base, model._dh, model._var_rows, *muscles._geom, *muscles._tendon, q, dummy
    )
    return J


def muscle_forces(muscles: MuscleSet, S) -> np.ndarray:
    S = _check_S(muscles, S)
    phi, _ = _kern.impl().tendon_forces(*muscles._tendon, S)
    return phi


def muscle_torques(model: LinkageModel, muscles: MuscleSet, q, state: MuscleState) -> np.ndarray:
    """Joint torques from all muscles at (q, S), cross-product form."""
    q = model._check_q(q)
    S = _check_S(muscles, state.S)
    _, _, _, tau = _kern.impl().muscle_eval(
        model._base, model._dh, model._var_rows, *muscles._geom, *muscles._tendon, q, S
    )
    return tau


def actuation(model: LinkageModel, muscles: MuscleSet, q, S):
    """Fused per-step evaluation: lengths, dL/dq, forces, torques."""
    q = model._check_q(q)
    S = _check_S(muscles, S)
    return _kern.impl().muscle_eval(
        model._base, model._dh, model._var_rows, *muscles._geom, *muscles._tendon, q, S
    )


def torque_jacobians(model: LinkageModel, muscles: MuscleSet, q, state: MuscleState):
    """(dtau/dq, dtau/dS) at (q, S).

    dtau/dS factorizes exactly as -(dL/dq)^T diag(dphi/dS); dtau/dq uses
    central differences of the torques.
    """
    q = model._check_q(q)
    S = _check_S(muscles, state.S)
    return _kern.impl().torque_jacobians(
        model._base, model._dh, model._var_rows, *muscles._geom, *muscles._tendon, q, S
    )
