"""Exact state-vector simulation of brickwork Goldilocks-type QCA.

One time step is ``U = G(V, 1) G(V, 0)``, where ``G(V, q)`` applies the
three-site neighborhood gate to every target site of parity ``q``.  A
neighborhood gate applies ``V`` to its target when the rule's activation
table evaluates to 1 on the two (left, right) control bits.

States are stored as flat complex arrays of length ``2**L``; site 0 is the
most significant bit of the basis index.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .pauli import SIGMA, string_expectation

UNITARY_TOL = 1e-12


class InvalidParameterError(ValueError):
    """Raised for degenerate or out-of-domain physical parameters."""


class UpdateRule(enum.Enum):
    GOLDILOCKS = "goldilocks"
    PXP = "pxp"
    FREDRICKSON_ANDERSEN = "fa"

    def activation(self, m: int, n: int) -> int:
        if self is UpdateRule.GOLDILOCKS:
            return m ^ n
        if self is UpdateRule.PXP:
            return 1 - (m ^ n) - m * n
        return (m ^ n) + m * n

    @property
    def table(self) -> np.ndarray:
        """Activation table ``f[m, n]``."""
        return np.array([[self.activation(m, n) for n in (0, 1)] for m in (0, 1)])

    @classmethod
    def parse(cls, name) -> "UpdateRule":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "goldilocks": cls.GOLDILOCKS,
            "g": cls.GOLDILOCKS,
            "pxp": cls.PXP,
            "fa": cls.FREDRICKSON_ANDERSEN,
            "fredrickson_andersen": cls.FREDRICKSON_ANDERSEN,
            "fredricksonandersen": cls.FREDRICKSON_ANDERSEN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown update rule {name!r}") from None


@dataclass(frozen=True)
class SingleSiteUnitary:
    """A 2x2 unitary update, with the parameters it was built from (if any)."""

    matrix: np.ndarray
    params: dict | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("single-site unitary must be 2x2")
        if np.abs(m.conj().T @ m - np.eye(2)).max() > UNITARY_TOL:
            raise InvalidParameterError("matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def vfree_matrix(alpha: float, beta: float, sign: int) -> np.ndarray:
    """The free-fermion update ``V_free(alpha, beta, +/-)``.

    ``sign=-1`` gives ``[[cos a, e^{-ib} sin a], [e^{ib} sin a, -cos a]]``
    (determinant -1) and ``sign=+1`` gives
    ``[[cos a, -e^{-ib} sin a], [e^{ib} sin a, cos a]]`` (determinant +1).
    """
    if sign not in (1, -1):
        raise InvalidParameterError("sign must be +1 or -1")
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array(
        [[c, -sign * np.exp(-1j * beta) * s], [np.exp(1j * beta) * s, sign * c]],
        dtype=complex,
    )


def generic_matrix(a: complex, b: complex) -> np.ndarray:
    norm2 = abs(a) ** 2 + abs(b) ** 2
    if norm2 == 0:
        raise InvalidParameterError("(a, b) = (0, 0) does not define a unitary")
    return np.array([[a, b], [-np.conj(b), np.conj(a)]], dtype=complex) / np.sqrt(norm2)


def make_single_site_unitary(
    alpha: float | None = None,
    beta: float | None = None,
    sign: int | None = None,
    *,
    a: complex | None = None,
    b: complex | None = None,
) -> SingleSiteUnitary:
    """Build either ``V_free(alpha, beta, sign)`` or the generic ``V'(a, b)``.

    Examples
    --------
    >>> make_single_site_unitary(0.0, 0.0, -1).matrix.real
    array([[ 1.,  0.],
           [ 0., -1.]])
    """
    if a is not None or b is not None:
        if alpha is not None or sign is not None:
            raise InvalidParameterError("give either (alpha, beta, sign) or (a, b)")
        a = 0j if a is None else complex(a)
        b = 0j if b is None else complex(b)
        return SingleSiteUnitary(generic_matrix(a, b), {"a": a, "b": b})
    if alpha is None or sign is None:
        raise InvalidParameterError("alpha and sign are required for V_free")
    beta = 0.0 if beta is None else float(beta)
    return SingleSiteUnitary(
        vfree_matrix(alpha, beta, int(sign)),
        {"alpha": float(alpha), "beta": beta, "sign": int(sign)},
    )


def sample_random_unitary(seed: int) -> SingleSiteUnitary:
    """Draw ``V'(a, b)`` with Re/Im of ``a`` and ``b`` i.i.d. standard normal."""
    rng = np.random.default_rng(seed)
    while True:
        re_a, im_a, re_b, im_b = rng.standard_normal(4)
        a, b = complex(re_a, im_a), complex(re_b, im_b)
        if abs(a) + abs(b) > 0:
            break
    V = make_single_site_unitary(a=a, b=b)
    return SingleSiteUnitary(V.matrix, {"a": a, "b": b, "seed": int(seed)})


def neighborhood_gate(V, rule=UpdateRule.GOLDILOCKS) -> np.ndarray:
    """8x8 gate ``sum_{m,n} |m><m| (x) V^{f(m,n)} (x) |n><n|`` (left, target, right)."""
    V = np.asarray(V, dtype=complex)
    rule = UpdateRule.parse(rule)
    gate = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)
    for m in (0, 1):
        for n in (0, 1):
            block = V if rule.activation(m, n) else np.eye(2)
            gate[m, :, n, m, :, n] = block
    return gate.reshape(8, 8)


def tilted_ferromagnet(L: int, theta: float, phi: float) -> np.ndarray:
    """Product state ``(cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>)^{(x) L}``."""
    if L < 1:
        raise ValueError("L must be positive")
    site = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    psi = np.ones(1, dtype=complex)
    for _ in range(L):
        psi = np.kron(psi, site)
    return psi / np.linalg.norm(psi)


def y_ferromagnet(L: int) -> np.ndarray:
    return tilted_ferromagnet(L, np.pi / 2, np.pi / 2)


def basis_state(L: int, bits) -> np.ndarray:
    """Computational basis state from a bit sequence (site 0 first) or a string like ``"0101"``."""
    bits = [int(c) for c in bits]
    if len(bits) != L:
        raise ValueError("bit string length must equal L")
    idx = int("".join(map(str, bits)), 2)
    psi = np.zeros(2**L, dtype=complex)
    psi[idx] = 1.0
    return psi


@dataclass(frozen=True)
class CircuitSpec:
    L: int
    V: SingleSiteUnitary
    rule: UpdateRule = UpdateRule.GOLDILOCKS

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ValueError("L must be an even integer >= 2")
        if not isinstance(self.V, SingleSiteUnitary):
            object.__setattr__(self, "V", SingleSiteUnitary(np.asarray(self.V)))
        object.__setattr__(self, "rule", UpdateRule.parse(self.rule))


def _site_blocks(V, L: int, q: int):
    """Per-target update matrices for a layer; ``V`` may be one matrix or one per target."""
    targets = list(range(q, L, 2))
    V = np.asarray(V, dtype=complex)
    if V.shape == (2, 2):
        return [(t, V) for t in targets]
    if V.shape != (len(targets), 2, 2):
        raise ValueError(f"expected a 2x2 matrix or {len(targets)} of them")
    return list(zip(targets, V))


def apply_layer(psi: np.ndarray, L: int, V, q: int, rule=UpdateRule.GOLDILOCKS) -> np.ndarray:
    """Apply ``G(V, q)`` in place to ``psi``.

    ``psi`` has ``2**L`` leading amplitudes and may carry trailing batch
    dimensions (e.g. the columns of an identity, to build ``G`` itself).
    """
    rule = UpdateRule.parse(rule)
    active = [(m, n) for m in (0, 1) for n in (0, 1) if rule.activation(m, n)]
    batch = psi.shape[1:] if psi.ndim > 1 else ()
    tensor = psi.reshape((2,) * L + batch)
    for t, Vt in _site_blocks(V, L, q):
        left, right = (t - 1) % L, (t + 1) % L
        view = np.moveaxis(tensor, (left, t, right), (0, 1, 2))
        for m, n in active:
            sub = view[m, :, n]
            view[m, :, n] = np.tensordot(Vt, sub, axes=(1, 0))
    return psi


def step(psi: np.ndarray, spec: CircuitSpec) -> np.ndarray:
    apply_layer(psi, spec.L, spec.V.matrix, 0, spec.rule)
    apply_layer(psi, spec.L, spec.V.matrix, 1, spec.rule)
    return psi


def evolve(state: np.ndarray, spec: CircuitSpec, steps: int) -> np.ndarray:
    """Return ``U(V)**steps |state>``; the input array is not modified."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    state = np.asarray(state)
    if state.shape[0] != 2**spec.L:
        raise ValueError(f"state dimension {state.shape[0]} does not match L={spec.L}")
    psi = np.array(state, dtype=complex, copy=True)
    for _ in range(steps):
        step(psi, spec)
    return psi


def iter_evolution(state: np.ndarray, spec: CircuitSpec, steps: int):
    """Yield ``(t, psi_t)`` for ``t = 0..steps``; ``psi_t`` is reused between yields."""
    psi = evolve(state, spec, 0)
    yield 0, psi
    for t in range(1, steps + 1):
        step(psi, spec)
        yield t, psi


def layer_matrix(L: int, V, q: int, rule=UpdateRule.GOLDILOCKS) -> np.ndarray:
    """Dense ``2**L`` matrix of ``G(V, q)`` (small ``L`` only)."""
    M = np.eye(2**L, dtype=complex)
    return apply_layer(M, L, V, q, rule)


def step_matrix(L: int, V, rule=UpdateRule.GOLDILOCKS) -> np.ndarray:
    """Dense one-step unitary ``U(V) = G(V,1) G(V,0)`` (small ``L`` only)."""
    M = np.eye(2**L, dtype=complex)
    apply_layer(M, L, V, 0, rule)
    apply_layer(M, L, V, 1, rule)
    return M


def shift_matrix(L: int, k: int = 1) -> np.ndarray:
    """Dense permutation ``Pi**k`` sending the content of site ``j`` to site ``j+k``."""
    b = np.arange(2**L)
    k %= L
    # site j <-> bit L-1-j; moving content to higher site index = rotating bits right
    rotated = ((b >> k) | (b << (L - k))) & (2**L - 1)
    M = np.zeros((2**L, 2**L))
    M[rotated, b] = 1.0
    return M


def expectation_string(
    state: np.ndarray, L: int, gamma: str, k: int, offset: int | None = None
) -> float:
    """``<(sigma^gamma)^{(x) k}>`` on ``k`` contiguous sites.

    With ``offset=None`` the value is averaged over all ``L`` cyclic
    placements of the string.
    """
    if gamma not in ("x", "y", "z"):
        raise ValueError("gamma must be one of 'x', 'y', 'z'")
    if not 1 <= k <= L:
        raise ValueError(f"string length k={k} must lie in [1, L={L}]")
    offsets = range(L) if offset is None else [offset]
    vals = [string_expectation(state, L, gamma * k, j) for j in offsets]
    val = np.mean(vals)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"imaginary residue {val.imag:.3e} in Hermitian expectation")
    return float(val.real)


def cz_pair_matrix() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(complex)


def decomposed_neighborhood_gate(alpha: float) -> np.ndarray:
    """``e^{-i a/2 Y_t} CZ_{l,t} CZ_{t,r} e^{+i a/2 Y_t}`` on (left, target, right)."""
    I2 = np.eye(2)
    ry = np.cos(alpha / 2) * I2 - 1j * np.sin(alpha / 2) * SIGMA["y"]
    rot = np.kron(np.kron(I2, ry), I2)
    cz = cz_pair_matrix()
    czs = np.kron(cz, I2) @ np.kron(I2, cz)
    return rot @ czs @ rot.conj().T


def cz_layer_diagonal(L: int) -> np.ndarray:
    """Diagonal of ``prod_j CZ_{j, j+1}`` on a ring: ``(-1)`` to the number of adjacent 11 pairs."""
    b = np.arange(2**L)
    rot = ((b >> 1) | (b << (L - 1))) & (2**L - 1)
    pairs = b & rot
    count = np.zeros(b.size, dtype=np.int64)
    while np.any(pairs):
        count += pairs & 1
        pairs >>= 1
    return (-1.0) ** count


def single_site_bloch(theta: float, phi: float) -> np.ndarray:
    """Bloch vector of ``|theta, phi>``."""
    return np.array(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
    )


__all__ = [
    "InvalidParameterError",
    "UpdateRule",
    "SingleSiteUnitary",
    "CircuitSpec",
    "SIGMA",
    "vfree_matrix",
    "make_single_site_unitary",
    "sample_random_unitary",
    "neighborhood_gate",
    "tilted_ferromagnet",
    "y_ferromagnet",
    "basis_state",
    "apply_layer",
    "step",
    "evolve",
    "iter_evolution",
    "layer_matrix",
    "step_matrix",
    "shift_matrix",
    "expectation_string",
    "cz_pair_matrix",
    "decomposed_neighborhood_gate",
    "cz_layer_diagonal",
]
