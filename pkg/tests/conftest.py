import numpy as np
import pytest

from diffeolab import geometry as geo


@pytest.fixture(scope="session")
def torus1_256():
    return geo.unit_torus(1, 256)


@pytest.fixture(scope="session")
def torus2_128():
    return geo.unit_torus(2, 128)


@pytest.fixture(scope="session")
def torus2_256():
    return geo.unit_torus(2, 256)


@pytest.fixture(scope="session")
def box2_128():
    return geo.make_box([(0.0, 1.0), (0.0, 1.0)], [128, 128])


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
