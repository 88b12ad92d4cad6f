import numpy as np
import pytest

from navtune import courses
from navtune.types import EnvSpec, ParamSet, Pose


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def open_env() -> EnvSpec:
    return courses.open_course()


@pytest.fixture
def corridor_env() -> EnvSpec:
    return courses.corridor_course()


@pytest.fixture
def default_params() -> ParamSet:
    return ParamSet.default()


def random_pose(rng: np.random.Generator, env: EnvSpec) -> Pose:
    return Pose(
        float(rng.uniform(0.5, env.width_m - 0.5)),
        float(rng.uniform(0.5, env.height_m - 0.5)),
        float(rng.uniform(-np.pi, np.pi)),
    )


def random_params(rng: np.random.Generator) -> ParamSet:
    from navtune.types import PARAM_HIGH, PARAM_LOW, clip_params

    vec = rng.uniform(PARAM_LOW, PARAM_HIGH)
    return ParamSet.from_array(clip_params(vec))
