import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seizure_acs.exceptions import NumericalError
from seizure_acs.linalg import jacobi_eigh, sym_eigenvalues


def _charpoly_roots(a):
    """Eigenvalues via Faddeev-LeVerrier coefficients and polynomial roots."""
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    c = 1.0
    for k in range(1, n + 1):
        m = a @ m + c * np.eye(n)
        c = -np.trace(a @ m) / k
        coeffs.append(c)
    return np.sort(np.roots(coeffs).real)[::-1]


def test_identity_and_all_ones():
    assert sym_eigenvalues(np.eye(5)) == pytest.approx(np.ones(5))
    np.testing.assert_allclose(sym_eigenvalues(np.ones((4, 4))), [4, 0, 0, 0], atol=1e-12)


def test_matches_characteristic_polynomial():
    rng = np.random.default_rng(0)
    b = rng.standard_normal((5, 5))
    a = (b + b.T) / 2
    np.testing.assert_allclose(sym_eigenvalues(a), _charpoly_roots(a), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 30), seed=st.integers(0, 2**20))
def test_eigenpairs(n, seed):
    b = np.random.default_rng(seed).standard_normal((n, n))
    a = b + b.T
    w, v = jacobi_eigh(a)
    assert np.all(np.diff(w) <= 0)
    assert w.sum() == pytest.approx(np.trace(a), abs=1e-9 * max(1, np.abs(a).sum()))
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(a @ v, v * w, atol=1e-9 * np.linalg.norm(a))


def test_zero_matrix_and_errors():
    w, v = jacobi_eigh(np.zeros((3, 3)))
    assert np.all(w == 0)
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NumericalError):
        jacobi_eigh(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(NumericalError):
        jacobi_eigh(np.array([[1.0, 0.5], [0.5, 2.0]]), max_sweeps=0)
