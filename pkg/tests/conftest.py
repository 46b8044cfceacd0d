import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qshard.statevector import from_global
from qshard.transport import run_spmd


def spmd(size, fn, mode="scheduled"):
    return run_spmd(size, fn, mode=mode)


def run_on_state(nq, vec, n_ranks, op, mode="scheduled"):
    """Load ``vec`` on ``n_ranks`` ranks, apply ``op(shard)`` and gather the result."""

    def work(comm):
        shard = from_global(nq, vec, comm)
        op(shard)
        return shard.gather()

    return spmd(n_ranks, work, mode)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_COUNT = 9


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        line = mod.RESULTS.get(n, f"criterion {n} [FAIL] did not run to completion")
        terminalreporter.write_line(line)
