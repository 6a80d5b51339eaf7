from __future__ import annotations

import numpy as np
import pytest

from plate_harnack.exponents import default_exponents
from plate_harnack.geometry import build_domain
from plate_harnack.suites import calibrate_harnack


@pytest.fixture(scope="session")
def e2():
    return default_exponents(2)


@pytest.fixture(scope="session")
def harnack_calibration(e2):
    return calibrate_harnack(e2, seed=0)


@pytest.fixture(scope="session")
def unit_square_64():
    return build_domain("rectangle", 1 / 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
