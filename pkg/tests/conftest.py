import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from denstree.schema import Box, Continuous, Dataset, Discrete, Variable, VariableSchema

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def unit1d():
    return VariableSchema([Variable("x", Continuous(0.0, 1.0))])


@pytest.fixture
def unit2d():
    return VariableSchema([Variable("x1", Continuous(0.0, 1.0)), Variable("x2", Continuous(0.0, 1.0))])


@pytest.fixture
def mixed_schema():
    return VariableSchema(
        [
            Variable("c0", Continuous(0.0, 1.0)),
            Variable("c1", Continuous(0.0, 1.0)),
            Variable("q0", Discrete(3)),
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(schema, values):
    return Dataset(schema, np.asarray(values, dtype=np.float64))
