import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ar1(rho, n, seed):
    """AR(1) series with unit stationary variance."""
    from scipy.signal import lfilter

    r = np.random.default_rng(seed)
    e = r.standard_normal(n + 1000) * np.sqrt(1 - rho * rho)
    return lfilter([1.0], [1.0, -rho], e)[1000:]


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
