import numpy as np
import pytest
from scipy.optimize import minimize, rosen

from normlab.optimize import nelder_mead_batch, start_rng, thread_cap


def rosen_rows(X):
    return np.array([rosen(x) for x in X])


def sphere(X):
    return np.sum((X - 1.5) ** 2, axis=1)


def test_sphere_converges():
    x0 = np.stack([start_rng(0, k).uniform(-3, 3, 4) for k in range(5)])
    res = nelder_mead_batch(sphere, x0, step=0.5, max_iters=5000)
    assert res.converged.all()
    np.testing.assert_allclose(res.x, 1.5, atol=1e-8)
    assert res.fun.max() < 1e-14


def test_rosenbrock_matches_scipy():
    x0 = np.array([[-1.2, 1.0], [0.5, -0.5]])
    res = nelder_mead_batch(rosen_rows, x0, step=0.1, max_iters=10_000, xatol=1e-12, fatol=1e-20)
    for k in range(2):
        ref = minimize(rosen, x0[k], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-20, "maxiter": 10_000})
        np.testing.assert_allclose(res.x[k], ref.x, atol=1e-6)
        np.testing.assert_allclose(res.x[k], [1.0, 1.0], atol=1e-6)


def test_rows_independent():
    x0 = np.stack([start_rng(4, k).uniform(-2, 2, 3) for k in range(6)])
    both = nelder_mead_batch(rosen_rows, x0, max_iters=300)
    for k in range(6):
        one = nelder_mead_batch(rosen_rows, x0[k : k + 1], max_iters=300)
        np.testing.assert_array_equal(one.x[0], both.x[k])
        assert one.iterations[0] == both.iterations[k]


def test_iteration_cap():
    res = nelder_mead_batch(rosen_rows, np.array([[-1.2, 1.0]]), max_iters=5)
    assert res.iterations[0] == 5 and not res.converged[0]


def test_one_dimensional():
    res = nelder_mead_batch(lambda X: (X[:, 0] - 2.0) ** 2, np.array([[0.0], [5.0]]), step=1.0)
    np.testing.assert_allclose(res.x[:, 0], 2.0, atol=1e-8)


def test_start_rng_reproducible():
    a = start_rng(7, 3).uniform(size=4)
    b = start_rng(7, 3).uniform(size=4)
    c = start_rng(7, 4).uniform(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("NORMLAB_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("NORMLAB_THREADS", "junk")
    assert thread_cap() >= 1
    monkeypatch.delenv("NORMLAB_THREADS")
    assert thread_cap() >= 1
