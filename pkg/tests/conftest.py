import os
import sys

import numpy as np
import pytest
from hypothesis import settings

from cruot.core_types import DiscreteMeasure, PointCloud

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(seed, n=30, m=25, p=4, q=3):
    r = np.random.default_rng(seed)
    X = PointCloud(r.standard_normal((n, p)))
    Y = PointCloud(r.standard_normal((m, q)))
    return X, DiscreteMeasure.uniform(n), Y, DiscreteMeasure.uniform(m)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
