"""Cyclic Jacobi eigen-solver for small dense symmetric matrices."""

import math

import numpy as np
from numba import njit

from .exceptions import NumericalError

TOL = 1e-10
MAX_SWEEPS = 100


@njit(cache=True)
def _off_norm(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += a[i, j] * a[i, j]
    return math.sqrt(2.0 * s)


@njit(cache=True)
def _jacobi(a, v, tol, max_sweeps):
    # In-place on a (diagonalised) and v (accumulated rotations).
    # Returns the number of sweeps used, or -1 if the cap was hit.
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        if _off_norm(a) < tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1


def jacobi_eigh(m, *, tol=TOL, max_sweeps=MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm drops below
    ``tol * ||m||_F``.

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues sorted in descending order.
    v : ndarray, shape (n, n)
        Matching unit eigenvectors in the columns.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    scale = np.linalg.norm(a)
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    n = a.shape[0]
    v = np.eye(n)
    if scale == 0.0:
        return np.zeros(n), v
    a = 0.5 * (a + a.T)
    sweeps = _jacobi(a, v, tol * scale, max_sweeps)
    if sweeps < 0:
        raise NumericalError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def sym_eigenvalues(m):
    """Eigenvalues of a symmetric matrix, descending."""
    return jacobi_eigh(m)[0]
