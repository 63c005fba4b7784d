import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from disco_fcit.identity import IdentityToken
from disco_fcit.lowrank import LowRankAdapter
from disco_fcit.server import ClientUpdate


def make_update(vec, n, client_id=0, adapter=None):
    vec = np.asarray(vec, dtype=float)
    if adapter is None:
        adapter = LowRankAdapter(np.zeros((2, 1)), np.zeros((1, 2)))
    return ClientUpdate(adapter=adapter, token=IdentityToken(vec, n),
                        sample_count=n, client_id=client_id)


def random_adapter(rng, d, k, r, scale=1.0):
    return LowRankAdapter(scale * rng.standard_normal((d, r)),
                          scale * rng.standard_normal((r, k)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
