import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rctauc.dgp import DgpConfig, gen_model_spectrum, gen_pool

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_pool():
    return gen_pool(DgpConfig(pool_size=20_000, delta=0.2, seed=11))


@pytest.fixture(scope="session")
def small_models(small_pool):
    return gen_model_spectrum(small_pool, (100, 400, 1600), np.random.default_rng(3))


ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed again in the terminal summary."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
