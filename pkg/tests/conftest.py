import warnings

import numpy as np
import pytest

from netlap import geometry as geo


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def interval():
    return geo.interval(1.0)


@pytest.fixture
def unit_circle():
    return geo.circle(1.0)


@pytest.fixture
def square():
    return geo.rectangle(1.0, 1.0)


@pytest.fixture
def circles11():
    return geo.glued_circles(1.0, 1.0)


@pytest.fixture
def circles21():
    return geo.glued_circles(2.0, 1.0)


@pytest.fixture
def circ_seg():
    return geo.circle_with_segment(1.0, 1.0)


@pytest.fixture(autouse=True)
def _quiet_margin_warning():
    # many small test nets run with rho close to 4 eps on purpose
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="rho=.*margin")
        yield
