import numpy as np
import pytest

from myolink import (
    DHRow,
    LinkInertia,
    LinkageModel,
    Muscle,
    MuscleAttachment,
    MuscleSet,
    TendonCurve,
)
from myolink.presets import shoulder_model, shoulder_muscles, shoulder_scenario

PENDULUM_MASS = 1.4
PENDULUM_LENGTH = 0.45


@pytest.fixture(scope="session")
def model():
    return shoulder_model()


@pytest.fixture(scope="session")
def muscles(model):
    return shoulder_muscles(model)


@pytest.fixture(scope="session")
def scenario():
    return shoulder_scenario()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def make_pendulum(mass=PENDULUM_MASS, length=PENDULUM_LENGTH):
    """Single revolute link, point mass at distance ``length``.

    The base roll tips the joint axis onto world +y, so q measures the
    swing from the gravity-aligned rest pose: D = [m l^2] and
    g = m 9.81 l sin(q).
    """
    return LinkageModel(
        dh_rows=(DHRow(0.0, 0.0, 0.0, 0.0, "revolute"),),
        inertias=(
            LinkInertia(frame=1, mass=mass, com=np.array([0.0, length, 0.0]), inertia=np.zeros((3, 3))),
        ),
        base_rpy=np.array([-np.pi / 2, 0.0, 0.0]),
    )


def make_pendulum_muscle(a=0.3, b=0.25, slack=0.2, f_max=500.0):
    """Muscle from the fixed point straight above the pivot to the link.

    World length obeys the law of cosines: L^2 = a^2 + b^2 + 2 a b cos(q).
    """
    return MuscleSet(
        (
            Muscle(
                name="pendulum_muscle",
                origin=MuscleAttachment(0, np.array([0.0, -a, 0.0])),
                insertion=MuscleAttachment(1, np.array([0.0, b, 0.0])),
                tendon=TendonCurve(slack_length=slack, f_max=f_max),
            ),
        )
    )


def random_states(scenario, rng, count):
    """Joint/velocity/tendon samples around the preset's target pose."""
    n = scenario.model.dof
    m = len(scenario.muscles)
    for _ in range(count):
        q = scenario.q_target + rng.uniform(-0.7, 0.7, n)
        qdot = rng.uniform(-3.0, 3.0, n)
        S = scenario.muscles.slack_lengths * rng.uniform(0.97, 1.06, m)
        yield q, qdot, S
