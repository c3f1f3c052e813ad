import numpy as np
import pytest

from tspfcn.instance import TspInstance


@pytest.fixture
def unit_square() -> TspInstance:
    return TspInstance(
        id="unit-square",
        coords=((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)),
    )


@pytest.fixture
def triangle() -> TspInstance:
    return TspInstance(id="triangle", coords=((0.0, 0.0), (4.0, 0.0), (0.0, 3.0)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
