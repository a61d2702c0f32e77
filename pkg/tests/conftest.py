import numpy as np
import pytest

from hckernel import KernelSpec, assemble, build_tree


def make_instance(n=128, d=3, r=4, family="gaussian", sigma=1.0, jitter=1e-4, seed=0, n0=None):
    """Random points, their tree and assembled factors."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    spec = KernelSpec(family, sigma, jitter)
    tree = build_tree(X, n0 or r, r, seed)
    return X, spec, tree, assemble(tree, X, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":").rstrip("ab"))):
            terminalreporter.write_line(line)
