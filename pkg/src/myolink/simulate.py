"""Closed-loop simulation of the muscle-driven linkage under backstepping.

Fixed-step classical RK4 over the state (q, qdot, S); the controller is
evaluated inside every stage, while the backward-difference Psi_dot history
advances once per full step. Set-point regulation only: the reference has
zero velocity and acceleration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kern
from .controller import (
    BACKWARD_DIFFERENCE,
    ControllerConfig,
    ControllerInternals,
    PsiDotEstimator,
    control_input,
    error_system,
    lyapunov_diagnostics,
    psi_dot_analytic,
    solve_lyapunov,
    synthetic_feedback,
    tracking_error,
    zeta_dot,
)
from .errors import DivergenceFault, NumericalFault, ValidationError
from .linkage import SINGULAR_COND, DynamicsTerms, LinkageModel, _as_vec, dynamics_terms
from .muscle import MuscleSet

SETTLING_BAND_DEG = 1.0


@dataclass(frozen=True)
class Scenario:
    """Complete experiment description; angles at this boundary are degrees."""

    model: LinkageModel
    muscles: MuscleSet
    controller: ControllerConfig
    q_target_deg: np.ndarray
    init_offset_deg: float = 10.0
    initial_strain: float = 0.01
    dt: float = 1e-3
    t_end: float = 6.0
    seed: int = 42
    name: str = "scenario"
    gravity_override: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "q_target_deg", _as_vec(self.q_target_deg, self.model.dof, "q_target_deg"))
        if self.gravity_override is not None:
            object.__setattr__(self, "gravity_override", _as_vec(self.gravity_override, 3, "gravity_override"))
        if self.dt <= 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if self.t_end < 0 or (0 < self.t_end < self.dt):
            raise ValidationError(f"t_end must be 0 or >= dt, got {self.t_end}")
        if self.init_offset_deg < 0:
            raise ValidationError(f"init_offset_deg must be >= 0, got {self.init_offset_deg}")
        if self.initial_strain < 0:
            raise ValidationError(f"initial_strain must be >= 0, got {self.initial_strain}")
        if self.controller.dof != self.model.dof:
            raise ValidationError(
                f"controller is sized for {self.controller.dof} DOF, model has {self.model.dof}"
            )
        self.muscles.validate_frames(self.model)

    @property
    def q_target(self) -> np.ndarray:
        """Target joint angles in radians."""
        return np.radians(self.q_target_deg)

    def effective_model(self) -> LinkageModel:
        if self.gravity_override is None:
            return self.model
        return replace(self.model, gravity=self.gravity_override)


@dataclass(frozen=True)
class SimState:
    t: float
    q: np.ndarray
    qdot: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        for name in ("q", "qdot", "S"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"state field {name} contains non-finite values")
        if np.any(self.S <= 0):
            raise ValidationError("series-element lengths must stay > 0")


@dataclass
class Trace:
    """Uniform-timestep record of one run; arrays indexed by step."""

    t: np.ndarray
    q: np.ndarray
    q_des: np.ndarray
    q_err: np.ndarray
    qd: np.ndarray
    S: np.ndarray
    L: np.ndarray
    F: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    psi: np.ndarray
    psi_rate: np.ndarray
    w: np.ndarray
    zdot: np.ndarray
    V: np.ndarray
    V_dot: np.ndarray
    dt: float
    muscle_names: list[str] = field(default_factory=list)
    fault: str | None = None
    fault_time: float | None = None

    def __len__(self) -> int:
        return int(self.t.size)

    def settling_time(self, band_deg: float = SETTLING_BAND_DEG) -> float | None:
        """First time after which max |q_err| stays below the band forever."""
        band = np.radians(band_deg)
        outside = np.where(np.max(np.abs(self.q_err), axis=1) >= band)[0]
        if outside.size == 0:
            return float(self.t[0])
        if outside[-1] == self.t.size - 1:
            return None
        return float(self.t[outside[-1] + 1])


class _StagePre:
    """Psi_dot-independent part of one controller evaluation."""

    __slots__ = ("q", "qdot", "S", "D", "C", "g", "L", "Jl", "phi", "tau", "e", "psi", "qddot")

    def __init__(self, q, qdot, S, D, C, g, L, Jl, phi, tau, e, psi, qddot):
        self.q, self.qdot, self.S = q, qdot, S
        self.D, self.C, self.g = D, C, g
        self.L, self.Jl, self.phi, self.tau = L, Jl, phi, tau
        self.e, self.psi, self.qddot = e, psi, qddot


class _Pipeline:
    """Per-run precomputation shared by all stage evaluations."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.model = scenario.effective_model()
        self.muscles = scenario.muscles
        self.cfg = scenario.controller
        self.q_des = scenario.q_target
        n = self.model.dof
        self.n = n
        self.qdot_des = np.zeros(n)
        self.qddot_des = np.zeros(n)
        self.model_args = self.model.packed()
        self.muscle_args = (*self.muscles._geom, *self.muscles._tendon)
        terms0 = dynamics_terms(self.model, self.q_des, self.qdot_des)
        self.A, _ = error_system(terms0.D, self.cfg)
        self.P = solve_lyapunov(self.A, self.cfg.Q)
        self.analytic = self.cfg.psi_dot_mode != BACKWARD_DIFFERENCE

    def pre(self, q, qdot, S) -> _StagePre:
        kern = _kern.impl()
        D, C, g = kern.dynamics_terms(*self.model_args, q, qdot)
        L, Jl, phi, tau = kern.muscle_eval(*self.model_args[:3], *self.muscle_args, q, S)
        e = tracking_error(q, qdot, self.q_des, self.qdot_des)
        psi = synthetic_feedback(DynamicsTerms(D, C, g), e, self.qddot_des, self.cfg)
        ev = np.linalg.eigvalsh(D)
        if ev[0] <= 0.0 or ev[-1] / ev[0] > SINGULAR_COND:
            raise NumericalFault(
                f"inertia matrix numerically singular (eigenvalues {ev[0]:.3e}..{ev[-1]:.3e})"
            )
        qddot = np.linalg.solve(D, tau - C @ qdot - g)
        return _StagePre(q, qdot, S, D, C, g, L, Jl, phi, tau, e, psi, qddot)

    def psi_dot_of(self, pre: _StagePre) -> np.ndarray:
        """Analytic Psi_dot at a stage state (analytic mode only)."""
        return psi_dot_analytic(
            self.model, self.cfg, pre.e, pre.qdot, pre.qddot, pre.q, self.qddot_des
        )

    def post(self, pre: _StagePre, psi_dot):
        kern = _kern.impl()
        n = self.n
        w = pre.tau - pre.psi
        B = np.zeros((2 * n, n))
        B[n:, :] = np.linalg.inv(pre.D)
        zdot = zeta_dot(psi_dot, w, pre.e, B, self.P, self.cfg)
        dtau_dq, dtau_dS = kern.torque_jacobians(*self.model_args[:3], *self.muscle_args, pre.q, pre.S)
        Ldot = pre.Jl @ pre.qdot
        if not dtau_dS.any():
            # every tendon slack: contraction commands are moot, the arm is
            # ballistic until path stretch re-tensions the series elements
            U = np.zeros(dtau_dS.shape[1])
        else:
            U = control_input(zdot, dtau_dq, dtau_dS, pre.qdot, Ldot, self.cfg.pinv_rel_tol)
        if self.cfg.u_limit is not None:
            U = np.clip(U, -self.cfg.u_limit, self.cfg.u_limit)
        Sdot = Ldot + U
        V, V_dot = lyapunov_diagnostics(pre.e, w, self.P, self.cfg, zdot, psi_dot, B)
        internals = ControllerInternals(
            Psi=pre.psi, Psi_dot=psi_dot, w=w, zeta_dot=zdot, A=self.A, B=B, P=self.P,
            V=V, V_dot=V_dot, U=U, tau_m=pre.tau, lengths=pre.L, forces=pre.phi,
        )
        return pre.qddot, Sdot, internals

    def stage(self, q, qdot, S, psi_dot):
        """Full evaluation with a held Psi_dot (or analytic recompute)."""
        pre = self.pre(q, qdot, S)
        if self.analytic:
            psi_dot = self.psi_dot_of(pre)
        return self.post(pre, psi_dot)


def init_state(scenario: Scenario) -> SimState:
    """Seeded initial state: offset joint angles, preloaded tendons."""
    rng = np.random.default_rng(scenario.seed)
    n = scenario.model.dof
    off = rng.uniform(-scenario.init_offset_deg, scenario.init_offset_deg, n)
    q0 = np.radians(scenario.q_target_deg + off)
    s0 = scenario.muscles.slack_lengths * (1.0 + scenario.initial_strain)
    return SimState(t=0.0, q=q0, qdot=np.zeros(n), S=s0.copy())


def derivatives(state: SimState, scenario: Scenario, psi_dot=None):
    """(qdot, qddot, Sdot, internals) at the given state.

    ``psi_dot`` defaults to the flagged first-step zero vector; in
    directional-analytic mode it is recomputed from the state.
    """
    pipe = _Pipeline(scenario)
    if psi_dot is None:
        psi_dot = np.zeros(scenario.model.dof)
    qddot, Sdot, internals = pipe.stage(state.q, state.qdot, state.S, psi_dot)
    return state.qdot.copy(), qddot, Sdot, internals


def rk4_step(f, t, y, dt):
    """Classical fixed-step RK4 update for y' = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(state: SimState, scenario: Scenario, psi_dot=None) -> SimState:
    """Advance one dt; standalone variant of the loop inside simulate()."""
    pipe = _Pipeline(scenario)
    if psi_dot is None:
        psi_dot = np.zeros(scenario.model.dof)
    n = scenario.model.dof

    def f(t, yv):
        qddot, Sdot, _ = pipe.stage(yv[:n], yv[n:2 * n], yv[2 * n:], psi_dot)
        return np.concatenate([yv[n:2 * n], qddot, Sdot])

    y = np.concatenate([state.q, state.qdot, state.S])
    ynew = rk4_step(f, state.t, y, scenario.dt)
    if not np.all(np.isfinite(ynew)):
        raise DivergenceFault("non-finite state after RK4 step", state.t + scenario.dt)
    return SimState(t=state.t + scenario.dt, q=ynew[:n], qdot=ynew[n:2 * n], S=ynew[2 * n:])


def simulate(scenario: Scenario) -> Trace:
    """Run the closed loop to t_end and return the full trace.

    A numerical fault inside a step stops the run; the partial trace is
    preserved with the fault message and time stamp attached.
    """
    pipe = _Pipeline(scenario)
    n = pipe.n
    m = len(scenario.muscles)
    dt = scenario.dt
    nsteps = int(np.floor(scenario.t_end / dt + 1e-9)) if scenario.t_end > 0 else 0
    total = nsteps + 1

    cols = {
        "t": np.empty(total),
        "q": np.empty((total, n)), "q_des": np.empty((total, n)),
        "q_err": np.empty((total, n)), "qd": np.empty((total, n)),
        "S": np.empty((total, m)), "L": np.empty((total, m)),
        "F": np.empty((total, m)), "u": np.empty((total, m)),
        "tau": np.empty((total, n)), "psi": np.empty((total, n)),
        "psi_rate": np.empty((total, n)), "w": np.empty((total, n)),
        "zdot": np.empty((total, n)), "V": np.empty(total), "V_dot": np.empty(total),
    }

    estimator = PsiDotEstimator(dt)
    state0 = init_state(scenario)
    q, qdot, S = state0.q.copy(), state0.qdot.copy(), state0.S.copy()

    fault = None
    fault_time = None
    recorded = 0
    for k in range(total):
        t = k * dt
        try:
            pre = pipe.pre(q, qdot, S)
            if pipe.analytic:
                psi_dot_hold = pipe.psi_dot_of(pre)
            else:
                psi_dot_hold = estimator.update(pre.psi)
            qddot1, Sdot1, internals = pipe.post(pre, psi_dot_hold)
        except NumericalFault as exc:
            fault = str(exc)
            fault_time = getattr(exc, "t", t)
            break

        cols["t"][k] = t
        cols["q"][k] = q
        cols["q_des"][k] = pipe.q_des
        cols["q_err"][k] = q - pipe.q_des
        cols["qd"][k] = qdot
        cols["S"][k] = S
        cols["L"][k] = internals.lengths
        cols["F"][k] = internals.forces
        cols["u"][k] = internals.U
        cols["tau"][k] = internals.tau_m
        cols["psi"][k] = internals.Psi
        cols["psi_rate"][k] = internals.Psi_dot
        cols["w"][k] = internals.w
        cols["zdot"][k] = internals.zeta_dot
        cols["V"][k] = internals.V
        cols["V_dot"][k] = internals.V_dot
        recorded = k + 1

        if k == nsteps:
            break
        try:
            y = np.concatenate([q, qdot, S])
            k1 = np.concatenate([qdot, qddot1, Sdot1])

            def f_stage(yv):
                qdd, sd, _ = pipe.stage(yv[:n], yv[n:2 * n], yv[2 * n:], psi_dot_hold)
                return np.concatenate([yv[n:2 * n], qdd, sd])

            k2 = f_stage(y + 0.5 * dt * k1)
            k3 = f_stage(y + 0.5 * dt * k2)
            k4 = f_stage(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise DivergenceFault("non-finite state after RK4 step", t + dt)
            if np.any(y[2 * n:] <= 0.0):
                raise DivergenceFault("series-element length dropped to zero", t + dt)
            q, qdot, S = y[:n].copy(), y[n:2 * n].copy(), y[2 * n:].copy()
        except NumericalFault as exc:
            fault = str(exc)
            fault_time = getattr(exc, "t", t + dt)
            break

    return Trace(
        dt=dt,
        muscle_names=scenario.muscles.names,
        fault=fault,
        fault_time=fault_time,
        **{key: val[:recorded] for key, val in cols.items()},
    )
