import numpy as np
import pytest


def power_iteration(m, iters=10_000, seed=0):
    """Largest eigenvalue of a symmetric PSD matrix by plain power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = m @ v
        lam = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return lam


def brute_autocov(y, k):
    """Lag-k autocovariance by explicit loops over time and coordinates."""
    n, p = y.shape
    ybar = [sum(y[t, i] for t in range(n)) / n for i in range(p)]
    out = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for t in range(n - k):
                acc += (y[t + k, i] - ybar[i]) * (y[t, j] - ybar[j])
            out[i, j] = acc / (n - k)
    return out


def random_factor_panel(seed, n=120, p=15, r=2, noise=0.5, phi=0.7):
    """AR(1) factors loaded on random columns plus white noise."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, r))
    x = np.zeros((n, r))
    e = rng.standard_normal((n, r))
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x @ a.T + noise * rng.standard_normal((n, p))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
