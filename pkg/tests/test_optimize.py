import numpy as np
import pytest

from gstkit.optimize import LMConfig, levenberg_marquardt


def rosenbrock_ls(x):
    r = np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    j = np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    return r, j


def model(x):
    r, j = rosenbrock_ls(x)
    return float(r @ r), 2 * j.T @ r, 2 * j.T @ j


def value(x):
    r, _ = rosenbrock_ls(x)
    return float(r @ r)


def test_rosenbrock_minimum():
    res = levenberg_marquardt(model, value, np.array([-1.2, 1.0]))
    assert res.converged
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-8)
    assert res.value < 1e-20


def test_trace_non_increasing():
    res = levenberg_marquardt(model, value, np.array([-1.2, 1.0]))
    vals = [t[1] for t in res.trace]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert res.trace[0][0] == 0


def test_start_at_optimum_takes_no_step():
    res = levenberg_marquardt(model, value, np.array([1.0, 1.0]))
    assert res.iterations == 0 and res.reason == "gradient"


def test_iteration_cap_flags_non_convergence():
    res = levenberg_marquardt(model, value, np.array([-1.2, 1.0]), LMConfig(max_iter=2))
    assert not res.converged and res.reason == "max_iter"
    assert np.isfinite(res.grad_norm)


def test_linear_least_squares_one_step():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 5))
    b = rng.normal(size=20)

    def m(x):
        r = a @ x - b
        return float(r @ r), 2 * a.T @ r, 2 * a.T @ a

    res = levenberg_marquardt(m, lambda x: m(x)[0], np.zeros(5))
    assert np.allclose(res.x, np.linalg.lstsq(a, b, rcond=None)[0], atol=1e-9)


def test_singular_model_is_damped():
    # One flat direction: H is rank 1 but the step stays finite.
    def m(x):
        r = np.array([x[0] + x[1] - 2.0])
        j = np.array([[1.0, 1.0]])
        return float(r @ r), 2 * j.T @ r, 2 * j.T @ j

    res = levenberg_marquardt(m, lambda x: m(x)[0], np.zeros(2))
    assert res.value == pytest.approx(0.0, abs=1e-20)
    assert np.all(np.isfinite(res.x))
