import numpy as np
import pytest

from fibkit.gridmap import GridMap, identity_reference, sample_map
from fibkit.torus import square_torus

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def t1():
    return square_torus(1)


@pytest.fixture(scope="session")
def t2():
    return square_torus(2)


@pytest.fixture(scope="session")
def t3():
    return square_torus(3)


def make_shear(shape, a=0.2, b=0.1, grid=(64, 64), interp="trig"):
    """phi(x1, x2) = (x1 + a sin x2, x2 + b cos x1): the workhorse example."""

    def disp(nodes):
        return np.stack([a * np.sin(nodes[..., 1]),
                         b * np.cos(nodes[..., 0])], axis=-1)

    return sample_map(disp, shape, shape, identity_reference(2), grid, interp)


@pytest.fixture
def shear(t2):
    return make_shear(t2)
