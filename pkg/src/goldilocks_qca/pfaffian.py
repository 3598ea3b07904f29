"""Pfaffians of real skew-symmetric matrices.

Both routines use the Parlett-Reid tridiagonalization with partial
pivoting; ``pfaffian_batch`` vectorizes it over a leading stack axis so
that many small Wick contractions can be evaluated at once.
"""

from __future__ import annotations

import numpy as np

SKEW_TOL = 1e-10


class NotSkewSymmetricError(ValueError):
    pass


def _check_skew(A: np.ndarray, tol: float) -> None:
    if A.shape[-1] != A.shape[-2]:
        raise NotSkewSymmetricError("matrix must be square")
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A + np.swapaxes(A, -1, -2)).max(initial=0.0) > tol * scale:
        raise NotSkewSymmetricError("matrix is not skew-symmetric")


def pfaffian(M, tol: float = SKEW_TOL) -> float:
    """Pfaffian of a real skew-symmetric matrix.

    >>> pfaffian([[0.0, 2.5], [-2.5, 0.0]])
    2.5
    """
    A = np.array(M, dtype=float)
    _check_skew(A, tol)
    return float(pfaffian_batch(A[None], tol=np.inf)[0])


def pfaffian_batch(M, tol: float = SKEW_TOL) -> np.ndarray:
    """Pfaffians of a stack of skew-symmetric matrices with shape ``(B, n, n)``."""
    A = np.array(M, dtype=float)
    if A.ndim != 3:
        raise ValueError("expected a stack of matrices with shape (B, n, n)")
    if np.isfinite(tol):
        _check_skew(A, tol)
    B, n, _ = A.shape
    if n % 2:
        return np.zeros(B)
    pf = np.ones(B)
    rows = np.arange(B)
    for k in range(0, n - 1, 2):
        kp = k + 1 + np.argmax(np.abs(A[:, k + 1 :, k]), axis=1)
        swap = kp != k + 1
        if np.any(swap):
            r = rows[swap]
            p = kp[swap]
            tmp = A[r, k + 1, :].copy()
            A[r, k + 1, :] = A[r, p, :]
            A[r, p, :] = tmp
            tmp = A[r, :, k + 1].copy()
            A[r, :, k + 1] = A[r, :, p]
            A[r, :, p] = tmp
            pf[swap] *= -1.0
        piv = A[:, k, k + 1].copy()
        pf *= piv
        zero = piv == 0.0
        if k + 2 < n:
            safe = np.where(zero, 1.0, piv)
            tau = A[:, k, k + 2 :] / safe[:, None]
            col = A[:, k + 2 :, k + 1]
            A[:, k + 2 :, k + 2 :] += tau[:, :, None] * col[:, None, :]
            A[:, k + 2 :, k + 2 :] -= col[:, :, None] * tau[:, None, :]
    return pf
