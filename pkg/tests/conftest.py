import numpy as np
import pytest
from hypothesis import settings

from ternary_qaoa.finance import random_instance

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_instance():
    # 2 assets, budget 1: 4 qubits, small enough for dense checks
    return random_instance(2, 1, seed=11)


@pytest.fixture
def small_instance():
    return random_instance(3, 1, seed=7)
