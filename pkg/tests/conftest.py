import math
from functools import lru_cache

import pytest

from kslab.profiles import profile_for_mass
from kslab.radial_core import build_grid

FOUR_PI = 4 * math.pi


@lru_cache(maxsize=None)
def grid(r_max=12.0, n=400, grading="uniform", ratio=1.0):
    return build_grid(r_max, n, grading, ratio)


@lru_cache(maxsize=None)
def profile(eps, M=FOUR_PI, n=400, r_max=12.0):
    return profile_for_mass(eps, M, grid(r_max, n))


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
