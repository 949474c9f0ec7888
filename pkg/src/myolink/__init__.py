"""Muscle-driven linkage simulation with backstepping control."""

from ._kern import active_backend, available_backends, set_backend
from .controller import (
    ControllerConfig,
    ControllerInternals,
    ErrorState,
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
from .errors import DivergenceFault, NumericalFault, ScenarioFormatError, ValidationError
from .linkage import (
    DHRow,
    DynamicsTerms,
    LinkInertia,
    LinkageModel,
    dynamics_terms,
    forward_dynamics,
    forward_kinematics,
    gravity_vector,
    joint_axes,
    potential_energy,
)
from .muscle import (
    Muscle,
    MuscleAttachment,
    MuscleSet,
    MuscleState,
    TendonCurve,
    muscle_forces,
    muscle_jacobian,
    muscle_lengths,
    muscle_torques,
    tendon_force,
    torque_jacobians,
)
from .presets import shoulder_scenario
from .simulate import Scenario, SimState, Trace, derivatives, init_state, simulate, step_rk4

__version__ = "0.1.0"
