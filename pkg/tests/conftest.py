import numpy as np
import pytest

from kakf.scenario import SystemDims

ACCEPTANCE_REPORT = []


@pytest.fixture
def desk_dims():
    return SystemDims(m_bs=4, n_irs=8, n_users=2, l_ut=2, k_blocks=32, t_slots=2, i_frames=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
