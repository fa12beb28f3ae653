import warnings

import pytest

from lateral_ovm import kernels
from lateral_ovm.model import ModelParams

ACCEPTANCE_LINES = []


def make_params(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ModelParams(**kw)


@pytest.fixture
def own_lane_params():
    return make_params(alpha=2.85, p=1.0, q=0.0, lambda1=0.2, lambda2=0.0)


@pytest.fixture
def lateral_params():
    return make_params(alpha=2.85, p=0.8, q=0.2, lambda1=0.16, lambda2=0.04)


@pytest.fixture
def lateral_unstable_params():
    return make_params(alpha=2.2, p=0.8, q=0.2, lambda1=0.16, lambda2=0.04)


@pytest.fixture(params=kernels.available())
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
