import math
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bevtrack.geometry import Box7

# compiled kernels make the first call slow, so no per-example deadline
settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")

coords = st.floats(-50, 50, allow_nan=False)
sizes = st.floats(0.2, 8.0, allow_nan=False)
angles = st.floats(-math.pi, math.pi, allow_nan=False)


@st.composite
def boxes(draw, spread=coords):
    return Box7(draw(spread), draw(spread), draw(st.floats(-2, 2)), draw(sizes), draw(sizes), draw(sizes), draw(angles))


def random_box(rng, spread=1.0, size=(0.5, 2.0)):
    return Box7(
        *rng.normal(0.0, spread, 2), 0.0, *rng.uniform(*size, 2), 1.0, rng.uniform(-math.pi, math.pi)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
