"""Two-site translation orbits and momentum bases on the computational basis.

``Pi`` moves the content of site ``j`` to site ``j + 1``; since site 0 is
the most significant bit this is a right rotation of the basis index.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp


def rotate_bits(b, L: int, k: int = 1):
    """Basis index after ``Pi**k``."""
    k %= L
    if k == 0:
        return b
    return ((b >> k) | (b << (L - k))) & ((1 << L) - 1)


@lru_cache(maxsize=8)
def two_site_orbits(L: int):
    """Orbit data of ``Pi**2`` on all ``2**L`` basis states.

    Returns
    -------
    rep : ndarray
        Smallest index in each state's orbit.
    power : ndarray
        ``m`` with ``state = Pi**(2m) rep``.
    period : ndarray
        Orbit length of each state.
    """
    if L % 2:
        raise ValueError("L must be even")
    b = np.arange(2**L, dtype=np.int64)
    rep = b.copy()
    power = np.zeros_like(b)
    period = np.full_like(b, L // 2)
    cur = b
    found = np.zeros(b.size, dtype=bool)
    for m in range(1, L // 2 + 1):
        # cur = Pi^{-2m} b, so b = Pi^{2m} cur
        cur = rotate_bits(cur, L, L - 2)
        back = cur == b
        newly = back & ~found
        period[newly] = m
        found |= back
        better = cur < rep
        rep = np.where(better, cur, rep)
        power = np.where(better, m, power)
    power %= period
    for arr in (rep, power, period):
        arr.setflags(write=False)
    return rep, power, period


def domain_wall_values(L: int) -> np.ndarray:
    """Diagonal of ``Q1 = sum_j sigma^z_j sigma^z_{j+1}`` (``L - 2 * #walls``)."""
    b = np.arange(2**L, dtype=np.int64)
    walls = b ^ rotate_bits(b, L, 1)
    count = np.zeros(b.size, dtype=np.int64)
    while np.any(walls):
        count += walls & 1
        walls >>= 1
    return L - 2 * count


def momentum_basis(L: int, K: int, select=None):
    """Sparse orthonormal basis of the ``Pi**2 = exp(4 pi i K / L)`` eigenspace.

    Parameters
    ----------
    select : ndarray of bool, optional
        Mask over basis states (must be constant on orbits) restricting
        the representatives used, e.g. a fixed domain-wall value.

    Returns
    -------
    B : scipy.sparse.csc_matrix
        ``2**L x N`` matrix with orthonormal columns.
    reps : ndarray
        Orbit representative of each column.
    """
    half = L // 2
    K %= half
    rep, power, period = two_site_orbits(L)
    b = np.arange(2**L, dtype=np.int64)
    is_rep = rep == b
    if select is not None:
        is_rep &= select
    # momentum compatible with the orbit length
    is_rep &= (K * period) % half == 0
    reps = b[is_rep]
    col_of = -np.ones(2**L, dtype=np.int64)
    col_of[reps] = np.arange(reps.size)
    members = col_of[rep] >= 0
    states = b[members]
    cols = col_of[rep[members]]
    theta = 2 * np.pi * K / half
    vals = np.exp(-1j * theta * power[members]) / np.sqrt(period[members])
    B = sp.csc_matrix((vals, (states, cols)), shape=(2**L, reps.size))
    return B, reps


def momentum_blocks(L: int, select=None):
    """``[(K, B_K, reps_K)]`` for ``K = 0..L/2-1`` (empty sectors skipped)."""
    out = []
    for K in range(L // 2):
        B, reps = momentum_basis(L, K, select)
        if reps.size:
            out.append((K, B, reps))
    return out
