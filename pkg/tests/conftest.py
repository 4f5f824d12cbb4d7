import numpy as np
import pytest

from swsplit.stability import PhysicalParams


@pytest.fixture
def params():
    """Reference physical constants (defaults)."""
    return PhysicalParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
