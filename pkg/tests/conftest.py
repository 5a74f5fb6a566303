import numpy as np
import pytest

from prompkls.phase_basis import make_basis_config, make_phase_grid
from prompkls.synth import SynthScenario, generate_trajectory_set


@pytest.fixture
def grid():
    return make_phase_grid(101)


@pytest.fixture
def basis():
    return make_basis_config(20, 1e-6)


@pytest.fixture
def synth_set(grid):
    return generate_trajectory_set(SynthScenario(rng_seed=7, shape_seed=3), "inward", 20, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
