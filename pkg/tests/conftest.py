import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sparseloc.localize import train
from sparseloc.simulate import EnvironmentSpec, generate_survey


@pytest.fixture(scope="session")
def env():
    return EnvironmentSpec()


@pytest.fixture(scope="session")
def survey(env):
    return generate_survey(env)


@pytest.fixture(scope="session")
def model(survey):
    return train(survey[0])


@pytest.fixture(scope="session")
def quiet_env():
    """Noise-free testbed: no shadowing, no temporal noise."""
    return EnvironmentSpec(shadowing_sigma=0.0, temporal_sigma=0.0, samples_per_rp=10)


@pytest.fixture(scope="session")
def quiet_model(quiet_env):
    return train(generate_survey(quiet_env)[0])


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
