"""Shared test utilities: central finite differences and gradient comparison."""
import numpy as np


def finite_difference(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of one array."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * h)
    return g


def assert_close_grad(analytic: np.ndarray, numeric: np.ndarray, rtol=1e-4, atol=1e-7):
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    assert np.all(err <= atol + rtol * denom), \
        f"max rel err {np.max(err / np.maximum(denom, 1e-12))}"
