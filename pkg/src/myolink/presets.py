"""Bundled shoulder regulation scenario.

A 3-DOF ball-and-socket shoulder driven by eight straight-line muscles.
The DH chain keeps all three rotations at one center (two revolute rows,
one fixed quarter-turn row, one more revolute row); the arm mass hangs off
the last frame. Segment masses and attachment coordinates are
representative values for a 1.8 m / 75 kg adult, not measured data.
"""

import numpy as np

from .controller import ControllerConfig
from .linkage import FIXED, REVOLUTE, DHRow, LinkageModel, LinkInertia, forward_kinematics
from .muscle import Muscle, MuscleAttachment, MuscleSet, TendonCurve
from .simulate import Scenario

TORSO_FRAME = 0
HUMERUS_FRAME = 4

TARGET_DEG = np.array([50.0, 27.0, -45.0])

# name, origin point (torso frame), insertion point (humerus frame), f_max (N).
# The eight lines of action are laid out so their unit-force joint torques
# positively span all of torque space around the target pose (margin > 0.2
# within +-15 degrees): gravity is always holdable with pulling-only muscles.
_MUSCLE_TABLE = [
    ("deltoid_1", (-0.0828, 0.0594, 0.0233), (-0.0126, 0.0205, 0.0142), 900.0),
    ("deltoid_2", (-0.0233, -0.0594, -0.0828), (0.0270, -0.0061, -0.0039), 900.0),
    ("supraspinatus", (-0.0571, 0.0025, 0.0596), (-0.0272, -0.0059, -0.0029), 600.0),
    ("infraspinatus", (-0.0741, -0.0210, -0.0531), (0.0072, 0.0107, -0.0249), 700.0),
    ("subscapularis", (0.0459, 0.0758, -0.0298), (-0.0077, -0.0191, 0.0190), 700.0),
    ("teres_minor", (-0.0686, -0.0419, 0.0267), (0.0149, 0.0112, -0.0209), 450.0),
    ("teres_major", (-0.0212, -0.0519, -0.0732), (0.0072, 0.0269, -0.0026), 600.0),
    ("coracobrachialis", (0.0900, -0.0112, -0.0788), (0.0083, 0.0099, 0.0248), 450.0),
]


def shoulder_model() -> LinkageModel:
    """Ball-and-socket shoulder with the arm lumped onto the humerus frame."""
    dh_rows = (
        DHRow(0.0, 0.0, 0.0, -np.pi / 2, REVOLUTE),       # q1: flexion
        DHRow(0.0, 0.0, 0.0, 0.0, REVOLUTE),              # q2: inward rotation
        DHRow(np.pi / 2, 0.0, 0.0, np.pi / 2, FIXED),     # frame alignment
        DHRow(0.0, 0.0, 0.0, 0.0, REVOLUTE),              # q3: adduction
    )
    # Humerus x-axis runs down the bone at q = 0. The forearm+hand body is
    # rigidly attached in a bent-elbow (holding-a-cup) posture.
    inertias = (
        LinkInertia(
            frame=HUMERUS_FRAME,
            mass=2.1,
            com=np.array([0.13, 0.0, 0.0]),
            inertia=np.diag([0.0020, 0.0170, 0.0170]),
        ),
        LinkInertia(
            frame=HUMERUS_FRAME,
            mass=1.7,
            com=np.array([0.31, 0.12, 0.0]),
            inertia=np.diag([0.0160, 0.0045, 0.0180]),
        ),
    )
    return LinkageModel(
        dh_rows=dh_rows,
        inertias=inertias,
        base_translation=np.array([0.0, 0.0, 1.45]),
        gravity=np.array([0.0, 0.0, -9.81]),
    )


def shoulder_muscles(model: LinkageModel | None = None) -> MuscleSet:
    """Eight muscles spanning the shoulder; origins sit on the torso frame.

    Tendon slack lengths are sized at 98% of each path length in the target
    pose, so moderate strains cover the required holding forces.
    """
    if model is None:
        model = shoulder_model()
    frames = forward_kinematics(model, np.radians(TARGET_DEG))
    muscles = []
    for name, origin, insertion, f_max in _MUSCLE_TABLE:
        origin = np.asarray(origin)
        insertion = np.asarray(insertion)
        po = frames[TORSO_FRAME, :3, :3] @ origin + frames[TORSO_FRAME, :3, 3]
        pi = frames[HUMERUS_FRAME, :3, :3] @ insertion + frames[HUMERUS_FRAME, :3, 3]
        slack = 0.98 * float(np.linalg.norm(po - pi))
        muscles.append(
            Muscle(
                name=name,
                origin=MuscleAttachment(TORSO_FRAME, origin),
                insertion=MuscleAttachment(HUMERUS_FRAME, insertion),
                tendon=TendonCurve(slack_length=slack, f_max=f_max),
            )
        )
    return MuscleSet(tuple(muscles))


def shoulder_controller() -> ControllerConfig:
    # Kp/Kd give a critically damped 10 rad/s outer loop; gamma/R keeps the
    # torque loop at 200 1/s, fast against the outer loop yet well inside
    # the RK4 stability region at dt = 1 ms.
    n = 3
    return ControllerConfig(
        kp=np.full(n, 100.0),
        kd=np.full(n, 20.0),
        Q=10.0 * np.eye(2 * n),
        R=0.1 * np.eye(n),
        gamma=20.0 * np.eye(n),
    )


def shoulder_scenario(seed: int = 42) -> Scenario:
    """The bundled regulation experiment: targets (50, 27, -45) degrees."""
    model = shoulder_model()
    return Scenario(
        model=model,
        muscles=shoulder_muscles(model),
        controller=shoulder_controller(),
        q_target_deg=TARGET_DEG.copy(),
        init_offset_deg=10.0,
        initial_strain=0.01,
        dt=1e-3,
        t_end=6.0,
        seed=seed,
        name="shoulder-regulation",
    )
