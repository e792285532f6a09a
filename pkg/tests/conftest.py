import numpy as np
import pytest

from harness.pipeline import ExperimentService
from models.config import PotentialSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def zero_potential():
    return PotentialSpec()


@pytest.fixture
def quadratic_well():
    return PotentialSpec(kind="quadratic", strength=100.0)


@pytest.fixture
def service():
    return ExperimentService(workers=1)
