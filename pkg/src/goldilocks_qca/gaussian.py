"""Free-fermion simulation of the integrable Goldilocks update.

The y-axis Jordan-Wigner dictionary used throughout is

    psi_{2j}   = -S_j sigma^x_j,      psi_{2j+1} = S_j sigma^z_j,
    S_j = prod_{l<j} sigma^y_l,

so that ``sigma^y_j = -i psi_{2j} psi_{2j+1}`` and the y-ferromagnet is
the fermionic vacuum.  A Gaussian state is stored as the covariance
``C_ab = (i/2) <[psi_a, psi_b]>``.

For a quadratic ``H = (i/4) sum_{mn} h_mn psi_m psi_n`` the unitary
``exp(-iH)`` maps the covariance to ``O C O^T`` with ``O = expm(h)``;
this is the convention behind every ``QuadraticGenerator`` below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .pfaffian import pfaffian, pfaffian_batch

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class MajoranaCovariance:
    C: np.ndarray
    L: int

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.shape != (2 * self.L, 2 * self.L):
            raise ValueError(f"covariance must be {2 * self.L}x{2 * self.L}")
        if np.abs(C + C.T).max(initial=0.0) > 1e-12:
            raise ValueError("covariance is not skew-symmetric")
        object.__setattr__(self, "C", C)

    def purity_residual(self) -> float:
        return float(np.abs(self.C @ self.C + np.eye(2 * self.L)).max())


@dataclass(frozen=True)
class QuadraticGenerator:
    """Skew matrix ``K`` with ``expm(K)`` the Majorana rotation of a Gaussian unitary."""

    K: np.ndarray
    label: str = ""

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if np.abs(K + K.T).max(initial=0.0) > 1e-12:
            raise ValueError("generator is not skew-symmetric")
        object.__setattr__(self, "K", K)

    def orthogonal(self) -> np.ndarray:
        return sla.expm(self.K)

    def inverse(self) -> "QuadraticGenerator":
        return QuadraticGenerator(-self.K, f"inv({self.label})")


@dataclass(frozen=True)
class GaussianStep:
    """Orthogonal one-step update; ``factors`` lists generators left to right as in the operator product."""

    O: np.ndarray
    factors: tuple = field(default_factory=tuple)
    alpha: float = 0.0
    beta: float = 0.0
    sign: int = -1
    L: int = 0
    parity_sector: int = 1

    def orthogonality_residual(self) -> float:
        return float(np.abs(self.O @ self.O.T - np.eye(self.O.shape[0])).max())


def vacuum_covariance(L: int) -> MajoranaCovariance:
    """Covariance of the y-ferromagnet, the vacuum of the y-axis fermions."""
    if L < 1:
        raise ValueError("L must be positive")
    block = np.array([[0.0, -1.0], [1.0, 0.0]])
    return MajoranaCovariance(np.kron(np.eye(L), block), L)


def generator_h1(alpha: float, q: int, L: int) -> QuadraticGenerator:
    """Generator of ``exp(-i H1(alpha, q))`` with ``H1 = -(alpha/2) sum_j sigma^y_{2j+q}``."""
    if L % 2:
        raise ValueError("L must be even")
    if q not in (0, 1):
        raise ValueError("q must be 0 or 1")
    K = np.zeros((2 * L, 2 * L))
    for t in range(q, L, 2):
        K[2 * t, 2 * t + 1] = alpha
        K[2 * t + 1, 2 * t] = -alpha
    return QuadraticGenerator(K, f"H1(q={q})")


def generator_h2(L: int, parity_sector: int = 1) -> QuadraticGenerator:
    """Generator of ``exp(-i H2)``, the Majorana form of the layer ``prod_j CZ_{j,j+1}``.

    Bulk bonds couple ``psi_{2j}`` and ``psi_{2j+3}``; the bond closing the
    ring couples ``psi_{2L-2}`` to ``psi_1`` with a sign set by the fermion
    parity of the sector.
    """
    if L % 2:
        raise ValueError("L must be even")
    if parity_sector not in (1, -1):
        raise ValueError("parity_sector must be +1 or -1")
    n = 2 * L
    K = np.zeros((n, n))
    for j in range(L - 1):
        a, b = 2 * j, 2 * j + 3
        K[a, b] = np.pi / 2 * (-1) ** (j + 1)
        K[b, a] = -K[a, b]
    a, b = 2 * L - 2, 1
    K[a, b] = -np.pi / 2 * parity_sector
    K[b, a] = -K[a, b]
    return QuadraticGenerator(K, "H2")


def _polar_fix(O: np.ndarray) -> np.ndarray:
    if np.abs(O @ O.T - np.eye(O.shape[0])).max() <= ORTHO_TOL:
        return O
    U, _ = sla.polar(O)
    return U


def build_step(
    alpha: float, beta: float = 0.0, sign: int = -1, L: int = 8, parity_sector: int = 1
) -> GaussianStep:
    """Majorana rotation of one full step ``U(V_free(alpha, beta, sign))``.

    The rotation acts in the frame where ``beta = 0``; ``beta`` is stored
    and applied to observables at readout (see
    :func:`expectation_string_gaussian`).  For ``sign=+1`` the step
    equals ``CZ G(V_-(-alpha), 1) CZ G(V_-(-alpha), 0)``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a = alpha if sign == -1 else -alpha
    h2 = generator_h2(L, parity_sector)
    factors = []
    for q in (1, 0):
        h1 = generator_h1(a, q, L)
        if sign == 1:
            factors.append(h2)
        factors += [h1.inverse(), h2, h1]
    O = np.eye(2 * L)
    for g in factors:
        O = O @ g.orthogonal()
    return GaussianStep(
        O=_polar_fix(O),
        factors=tuple(g.label for g in factors),
        alpha=float(alpha),
        beta=float(beta),
        sign=int(sign),
        L=L,
        parity_sector=parity_sector,
    )


def evolve_covariance(C, step: GaussianStep, t: int) -> MajoranaCovariance:
    """Return ``O^t C (O^t)^T``, re-skew-symmetrizing after every step."""
    for cov in iter_covariance(C, step, t):
        pass
    return cov


def iter_covariance(C, step: GaussianStep, t: int):
    """Yield the covariance at times ``0..t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    M = C.C if isinstance(C, MajoranaCovariance) else np.asarray(C, dtype=float)
    if M.shape != step.O.shape:
        raise ValueError("covariance and step dimensions differ")
    L = M.shape[0] // 2
    M = M.copy()
    yield MajoranaCovariance(M.copy(), L)
    O = step.O
    for _ in range(t):
        M = O @ M @ O.T
        M = 0.5 * (M - M.T)
        yield MajoranaCovariance(M.copy(), L)


# --- observables -----------------------------------------------------------


def _site_majoranas(site: int, letter: str):
    """Majorana monomial ``(coef, indices)`` of a single Pauli letter, including its string."""
    string = []
    coef = 1.0 + 0j
    if letter in "xz":
        for l in range(site):
            string += [2 * l, 2 * l + 1]
            coef *= -1j
    if letter == "x":
        return -coef, string + [2 * site]
    if letter == "z":
        return coef, string + [2 * site + 1]
    if letter == "y":
        return -1j, [2 * site, 2 * site + 1]
    raise ValueError(f"unsupported letter {letter!r}")


def _permutation_parity(order: np.ndarray) -> int:
    seen = np.zeros(len(order), dtype=bool)
    parity = 0
    for i in range(len(order)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        parity ^= (length - 1) & 1
    return parity


def reduce_monomial(indices) -> tuple[int, tuple[int, ...]]:
    """Sort a Majorana product and cancel squares; returns ``(sign, sorted_indices)``."""
    idx = np.asarray(indices, dtype=int)
    order = np.argsort(idx, kind="stable")
    sign = -1 if _permutation_parity(order) else 1
    out = []
    for i in idx[order]:
        if out and out[-1] == i:
            out.pop()
        else:
            out.append(int(i))
    return sign, tuple(out)


def pauli_to_majorana(L: int, letters: dict[int, str]):
    """Express ``prod_j sigma^{letters[j]}_j`` as ``coef * psi_{i1}...psi_{i2m}`` with sorted indices.

    Sites are multiplied in increasing order; since Paulis on different
    sites commute, this is the operator itself.
    """
    coef = 1.0 + 0j
    idx: list[int] = []
    for site in sorted(letters):
        if letters[site] == "I":
            continue
        if not 0 <= site < L:
            raise ValueError("site index out of range")
        c, ind = _site_majoranas(site, letters[site])
        coef *= c
        idx += ind
    sign, red = reduce_monomial(idx)
    return coef * sign, red


def majorana_expectation(C: np.ndarray, indices) -> complex:
    """``<psi_{i1} ... psi_{i2m}>`` for strictly increasing indices, by Wick's theorem."""
    indices = list(indices)
    m2 = len(indices)
    if m2 == 0:
        return 1.0 + 0j
    if m2 % 2:
        return 0j
    sub = C[np.ix_(indices, indices)]
    # <psi_a psi_b> = -i C_ab for a != b, so Pf(-i C) = (-i)^m Pf(C)
    return (-1j) ** (m2 // 2) * pfaffian(sub)


_ROTATED = {
    # R^dag sigma R for R = prod exp(-i beta/2 sigma^z)
    "x": lambda c, s: {"x": c, "y": -s},
    "y": lambda c, s: {"y": c, "x": s},
    "z": lambda c, s: {"z": 1.0},
}


@lru_cache(maxsize=256)
def _string_terms(L: int, gamma: str, k: int, offset: int, beta: float):
    """Majorana monomials (coef, indices) whose sum is the frame-rotated string."""
    c, s = np.cos(beta), np.sin(beta)
    mixed = [(1.0, [])]
    rot = _ROTATED[gamma](c, s)
    rot = {a: w for a, w in rot.items() if w != 0.0}
    for _ in range(k):
        mixed = [(w * wa, word + [a]) for w, word in mixed for a, wa in rot.items()]
    terms = []
    for w, word in mixed:
        sites = [(offset + i) % L for i in range(k)]
        nodd = sum(1 for a in word if a in "xz")
        if nodd % 2:
            # odd under fermion parity: vanishes in every Gaussian state
            continue
        coef, idx = pauli_to_majorana(L, dict(zip(sites, word)))
        terms.append((w * coef, idx))
    return tuple(terms)


def expectation_string_gaussian(
    C, gamma: str, k: int, offset: int | None = None, beta: float = 0.0
) -> float:
    """``<(sigma^gamma)^{(x) k}>`` from a covariance matrix.

    ``C`` describes the state in the frame where ``beta = 0``; the lab
    observable is rotated accordingly.  With ``offset=None`` the value is
    averaged over all cyclic placements.
    """
    M = C.C if isinstance(C, MajoranaCovariance) else np.asarray(C, dtype=float)
    L = M.shape[0] // 2
    if gamma not in ("x", "y", "z"):
        raise ValueError("gamma must be one of 'x', 'y', 'z'")
    if not 1 <= k <= L:
        raise ValueError(f"string length k={k} must lie in [1, L={L}]")
    offsets = range(L) if offset is None else [offset % L]
    by_len: dict[int, tuple[list, list]] = {}
    for j in offsets:
        for coef, idx in _string_terms(L, gamma, k, j, float(beta)):
            coefs, idxs = by_len.setdefault(len(idx), ([], []))
            coefs.append(coef)
            idxs.append(idx)
    total = 0j
    for n, (coefs, idxs) in by_len.items():
        coefs = np.asarray(coefs)
        if n == 0:
            total += coefs.sum()
            continue
        I = np.asarray(idxs)
        subs = M[I[:, :, None], I[:, None, :]]
        pf = pfaffian_batch(subs, tol=np.inf)
        total += np.sum(coefs * (-1j) ** (n // 2) * pf)
    val = total / len(offsets)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"imaginary residue {val.imag:.3e} in Hermitian expectation")
    return float(val.real)


def string_series(C0, step: GaussianStep, steps: int, gamma: str, ks, offset=None):
    """Array ``F[t, i] = <(sigma^gamma)^{(x) ks[i]}>`` for ``t = 0..steps``."""
    ks = list(ks)
    out = np.empty((steps + 1, len(ks)))
    for t, cov in enumerate(iter_covariance(C0, step, steps)):
        for i, k in enumerate(ks):
            out[t, i] = expectation_string_gaussian(cov, gamma, k, offset, step.beta)
    return out


# --- dense Jordan-Wigner oracle -------------------------------------------


def dense_majoranas(L: int) -> list[np.ndarray]:
    """Dense ``2**L`` Majorana matrices built directly from Pauli strings (small ``L``)."""
    from .pauli import SIGMA

    def kron_all(ops):
        out = np.ones((1, 1), dtype=complex)
        for o in ops:
            out = np.kron(out, o)
        return out

    psis = []
    for j in range(L):
        pre = [SIGMA["y"]] * j
        post = [SIGMA["I"]] * (L - j - 1)
        psis.append(-kron_all(pre + [SIGMA["x"]] + post))
        psis.append(kron_all(pre + [SIGMA["z"]] + post))
    return psis


def dense_covariance(psi: np.ndarray, L: int) -> np.ndarray:
    """``(i/2) <[psi_a, psi_b]>`` of a state vector via explicit Majorana matrices."""
    ms = dense_majoranas(L)
    vecs = [m @ psi for m in ms]
    n = 2 * L
    C = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a != b:
                C[a, b] = (1j * np.vdot(psi, ms[a] @ vecs[b])).real
    return C


def frame_vacuum_state(L: int, beta: float) -> np.ndarray:
    """Lab-frame state whose rotated-frame image is the vacuum: each spin along ``(-sin b, cos b, 0)``."""
    from .core import tilted_ferromagnet

    return tilted_ferromagnet(L, np.pi / 2, np.pi / 2 + beta)


__all__ = [
    "MajoranaCovariance",
    "QuadraticGenerator",
    "GaussianStep",
    "vacuum_covariance",
    "generator_h1",
    "generator_h2",
    "build_step",
    "evolve_covariance",
    "iter_covariance",
    "pfaffian",
    "pfaffian_batch",
    "pauli_to_majorana",
    "majorana_expectation",
    "expectation_string_gaussian",
    "string_series",
    "dense_majoranas",
    "dense_covariance",
    "frame_vacuum_state",
]
