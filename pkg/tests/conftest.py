import numpy as np
import pytest

from capri.kernels import LINEAR, KernelSpec, PointSet, normalized_for


def random_points(rng, n, dim, context_id=0):
    emb = rng.standard_normal((n, dim))
    return PointSet(np.full(n, context_id), np.arange(n), emb)


def linear_spec(*point_sets):
    emb = np.vstack([p.embeddings for p in point_sets])
    return normalized_for(KernelSpec(LINEAR), emb)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
