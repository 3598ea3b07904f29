"""Pauli-string bookkeeping shared by the simulation and charge modules.

Site ``j`` of an ``L``-qubit register is the ``(L-1-j)``-th bit of a
computational-basis index, i.e. site 0 is the most significant bit.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

LABELS = "Ixyz"

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# index order used by transfer matrices and integer string codes
PAULI_BASIS = np.stack([SIGMA[c] for c in LABELS])


def normalize_labels(labels) -> str:
    """Map ``"XYZ"``, ``"xyz"``, ``"1"``/``"I"`` spellings onto the ``Ixyz`` alphabet."""
    out = []
    for c in labels:
        c = {"X": "x", "Y": "y", "Z": "z", "i": "I", "1": "I", "-": "I"}.get(c, c)
        if c not in LABELS:
            raise ValueError(f"unknown Pauli label {c!r}")
        out.append(c)
    return "".join(out)


def string_masks(L: int, labels: str, offset: int = 0):
    """Bit masks (flip, z-phase, y-count) for a contiguous string on a ring.

    Returns ``(flip, zmask, ny)`` where ``P|b> = i**ny * (-1)**popcount(b & zmask) |b ^ flip>``.
    """
    flip = zmask = 0
    ny = 0
    for i, c in enumerate(labels):
        if c == "I":
            continue
        bit = 1 << (L - 1 - ((offset + i) % L))
        if c in "xy":
            flip |= bit
        if c in "yz":
            zmask |= bit
        if c == "y":
            ny += 1
    return flip, zmask, ny


def _masked_parity(b: np.ndarray, mask: int) -> np.ndarray:
    """Parity of ``b & mask``, looping over the set bits of ``mask`` only."""
    out = np.zeros_like(b)
    pos = 0
    while mask:
        if mask & 1:
            out ^= (b >> pos) & 1
        mask >>= 1
        pos += 1
    return out


def string_action(L: int, labels: str, offset: int = 0):
    """Return ``(target, phase)`` arrays with ``P|b> = phase[b] |target[b]>``."""
    labels = normalize_labels(labels)
    if len(labels) > L:
        raise ValueError(f"string of length {len(labels)} does not fit on {L} sites")
    flip, zmask, ny = string_masks(L, labels, offset)
    b = np.arange(2**L, dtype=np.int64)
    # Y = i X Z, so each y contributes a factor i on top of its z-phase
    sign = 1 - 2 * _masked_parity(b, zmask)
    phase = (1j**ny) * sign
    return b ^ flip, phase.astype(complex)


def string_operator(L: int, labels: str, offset: int = 0) -> sp.csr_matrix:
    """Sparse ``2**L`` matrix of a Pauli string starting at ``offset`` (periodic)."""
    target, phase = string_action(L, labels, offset)
    cols = np.arange(2**L)
    return sp.csr_matrix((phase, (target, cols)), shape=(2**L, 2**L))


@lru_cache(maxsize=4)
def _basis_indices(L: int) -> np.ndarray:
    b = np.arange(2**L, dtype=np.int64)
    b.setflags(write=False)
    return b


def string_expectation(psi: np.ndarray, L: int, labels: str, offset: int = 0) -> complex:
    labels = normalize_labels(labels)
    if len(labels) > L:
        raise ValueError(f"string of length {len(labels)} does not fit on {L} sites")
    flip, zmask, ny = string_masks(L, labels, offset)
    psi = psi.reshape(-1)
    b = _basis_indices(L)
    sign = 1 - 2 * _masked_parity(b, zmask) if zmask else None
    if flip:
        amp = psi if sign is None else sign * psi
        val = np.vdot(psi[b ^ flip], amp)
    else:
        prob = np.abs(psi) ** 2
        val = prob.sum() if sign is None else np.dot(sign, prob)
    return complex((1j**ny) * val)


def transfer_matrix(gate: np.ndarray, adjoint_first: bool = True) -> np.ndarray:
    """Real Pauli transfer matrix of conjugation by a k-qubit gate.

    With ``adjoint_first`` the map is ``X -> g^dag X g``, otherwise
    ``X -> g X g^dag``. Column ``a`` holds the Pauli coefficients of the
    image of basis string ``a`` (labels in ``Ixyz`` order, first qubit
    most significant).
    """
    d = gate.shape[0]
    k = int(round(np.log2(d)))
    basis = PAULI_BASIS
    for _ in range(k - 1):
        basis = np.einsum("aij,bkl->abikjl", basis, PAULI_BASIS).reshape(
            basis.shape[0] * 4, 2 * basis.shape[1], 2 * basis.shape[2]
        )
    g = gate if adjoint_first else gate.conj().T
    images = np.einsum("ji,ajk,kl->ail", g.conj(), basis, g)
    R = np.einsum("bij,aji->ba", basis, images) / d
    if np.abs(R.imag).max() > 1e-10:
        raise ValueError("transfer matrix is not real; gate is not unitary?")
    return R.real
