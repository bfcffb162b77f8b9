import numpy as np
import pytest

from randsvm.dataset import from_dense


def random_instance(seed, task, n_max=60, d_max=10):
    """Small random problem with features in [-1, 1]."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, n_max + 1))
    d = int(rng.integers(2, d_max + 1))
    X = rng.uniform(-1, 1, (n, d))
    if task == "classify":
        y = np.where(X[:, 0] + 0.3 * rng.standard_normal(n) > 0, 1.0, -1.0)
        if abs(y.sum()) == n:
            y[0] = -y[0]
    else:
        y = np.sin(3 * X[:, 0]) + 0.1 * rng.standard_normal(n)
    return from_dense(X, y)


@pytest.fixture
def two_points():
    return from_dense(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for name, value in rep.user_properties:
                if name == "verdict":
                    lines.append(f"{rep.nodeid.split('::')[-1]}: {value}")
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
