import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def char_poly_coeffs(a):
    """Characteristic polynomial coefficients via Faddeev-LeVerrier.

    Independent of any eigensolver; used as an oracle for eigenvalue tests.
    """
    n = a.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def companion_roots(a):
    """Eigenvalue oracle: roots of the characteristic polynomial computed by
    companion-matrix root finding on Faddeev-LeVerrier coefficients."""
    return np.roots(char_poly_coeffs(a))
