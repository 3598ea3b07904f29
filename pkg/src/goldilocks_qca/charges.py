"""Translation-invariant Pauli-sum charges: library, verification and search.

A charge is a real combination of translation sums of contiguous Pauli
strings.  ``[A]`` sums a string over all ``L`` starting sites and
``[[A]]`` over the ``L/2`` even starting sites (odd starts are expressed
with ``shift=1``).

The search works on Pauli polynomials stored as integer codes: site ``j``
occupies bits ``2j, 2j+1`` with digits ``0,1,2,3 = I,x,y,z``.  Local
conjugation by a three-site gate is a real 64x64 Pauli transfer matrix,
so images of ansatz strings are computed exactly without ever forming
``2**L``-dimensional operators.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .core import UpdateRule, neighborhood_gate
from .pauli import LABELS, normalize_labels, string_expectation, string_operator, transfer_matrix

SINGULAR_ALPHA_TOL = 1e-6
SVD_REL_CUTOFF = 1e-10
GAP_CERTIFICATE = 1e3
DROP_TOL = 1e-15


class Bracket(enum.Enum):
    FULL = "full"
    EVEN = "even"

    @classmethod
    def parse(cls, value) -> "Bracket":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("full", "[]", "all"):
            return cls.FULL
        if v in ("even", "[[]]", "evensublattice", "even_sublattice"):
            return cls.EVEN
        raise ValueError(f"unknown bracket {value!r}")


@dataclass(frozen=True)
class PauliTerm:
    labels: str
    coefficient: float = 1.0

    def __post_init__(self):
        labels = normalize_labels(self.labels)
        if not labels or labels[0] == "I" or labels[-1] == "I":
            raise ValueError(f"term {labels!r} must start and end with a non-identity")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def support(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class TranslationSum:
    """``coefficient * sum_j A_{j}`` over all starts (FULL) or starts ``j = 2i + shift`` (EVEN)."""

    term: PauliTerm
    bracket: Bracket = Bracket.FULL
    shift: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bracket", Bracket.parse(self.bracket))
        if self.bracket is Bracket.FULL:
            object.__setattr__(self, "shift", 0)
        elif self.shift not in (0, 1):
            raise ValueError("shift must be 0 or 1")

    @classmethod
    def from_labels(cls, labels: str, coefficient: float = 1.0, bracket=Bracket.FULL):
        """Build from labels that may carry identity padding, e.g. ``"IxxI"``."""
        labels = normalize_labels(labels)
        stripped = labels.strip("I")
        if not stripped:
            raise ValueError("identity-only strings are not charges")
        lead = len(labels) - len(labels.lstrip("I"))
        return cls(PauliTerm(stripped, coefficient), bracket, lead % 2)

    def offsets(self, L: int):
        if self.bracket is Bracket.FULL:
            return range(L)
        return range(self.shift, L, 2)

    @property
    def coefficient(self) -> float:
        return self.term.coefficient


@dataclass
class Charge:
    sums: list
    name: str | None = None

    @property
    def support(self) -> int:
        return max((s.term.support for s in self.sums), default=0)

    def scaled(self, c: float) -> "Charge":
        return Charge(
            [replace(s, term=PauliTerm(s.term.labels, c * s.term.coefficient)) for s in self.sums],
            self.name,
        )

    def simplified(self, tol: float = 1e-14) -> "Charge":
        """Merge identical sums and drop vanishing coefficients."""
        acc: dict = {}
        for s in self.sums:
            key = (s.term.labels, s.bracket, s.shift)
            acc[key] = acc.get(key, 0.0) + s.term.coefficient
        sums = [
            TranslationSum(PauliTerm(lab, c), br, sh)
            for (lab, br, sh), c in acc.items()
            if abs(c) > tol
        ]
        return Charge(sums, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "terms": [
                {
                    "bracket": s.bracket.value,
                    "shift": s.shift,
                    "labels": s.term.labels,
                    "coefficient": s.term.coefficient,
                }
                for s in self.sums
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Charge":
        sums = [
            TranslationSum(PauliTerm(t["labels"], t["coefficient"]), t["bracket"], t.get("shift", 0))
            for t in d["terms"]
        ]
        return cls(sums, d.get("name"))

    def __str__(self) -> str:
        parts = []
        for s in self.sums:
            lab = s.term.labels
            body = f"[{lab}]" if s.bracket is Bracket.FULL else f"[[{'I' * s.shift}{lab}]]"
            parts.append(f"{s.term.coefficient:+.6g}{body}")
        return f"{self.name or 'Q'} = " + " ".join(parts)


def _charge(name: str, *terms) -> Charge:
    sums = []
    for coef, labels, bracket in terms:
        sums.append(TranslationSum.from_labels(labels, coef, bracket))
    return Charge(sums, name).simplified(tol=0.0)


def charge_library(alpha: float, printed: bool = False) -> list[Charge]:
    """The thirteen local charges of ``U(V_free(alpha, 0, -))``.

    Parameters
    ----------
    alpha : float
        Rotation angle of the update; ``tan(alpha)`` must be finite.
    printed : bool
        Use the typeset forms of Q4, Q6, Q7 and Q11 verbatim.  Those
        forms are not conserved; the default returns corrected versions
        that are (see the tests).

    Returns
    -------
    list of Charge
        ``Q1..Q8`` as full-lattice sums, ``Q9..Q13`` as even-sublattice sums.
    """
    if abs(math.cos(alpha)) < SINGULAR_ALPHA_TOL:
        raise ValueError("tan(alpha) diverges; alpha too close to pi/2 (mod pi)")
    t = math.tan(alpha)
    F, E = Bracket.FULL, Bracket.EVEN
    lib = [
        _charge("Q1", (1, "zz", F)),
        _charge("Q2", (t, "xx", F), (1, "xz", F), (1, "zx", F)),
        _charge("Q3", (1, "xyz", F), (-1, "zyx", F)),
    ]
    if printed:
        lib.append(_charge("Q4", (1, "y", F), (1, "zyx", F), (t, "xyz", F)))
    else:
        lib.append(_charge("Q4", (1, "y", F), (1, "zyz", F), (t, "xyz", F)))
    lib.append(_charge("Q5", (1, "xx", F), (1, "zyyz", F)))
    if printed:
        lib.append(_charge("Q6", (t, "xyyz", F), (-t, "zyyz", F), (1, "xyyz", F), (1, "zyyx", F)))
        lib.append(_charge("Q7", (1, "xyx", F), (-t, "xyz", F), (t, "xyyyz", F), (-1, "zyyyx", F)))
    else:
        lib.append(_charge("Q6", (t, "xyyx", F), (-t, "zyyz", F), (1, "xyyz", F), (1, "zyyx", F)))
        lib.append(_charge("Q7", (1, "xyx", F), (-t, "xyz", F), (-t, "xyyyz", F), (-1, "zyyyz", F)))
    lib.append(_charge("Q8", (1, "xyyyz", F), (-1, "zyyyx", F)))
    lib.append(_charge("Q9", (t, "xx", E), (1, "xz", E), (1, "zx", E), (-t, "zz", E)))
    lib.append(_charge("Q10", (1, "xyz", E), (-1, "zyx", E)))
    if printed:
        lib.append(_charge("Q11", (1, "y", E), (t, "xyz", E), (1, "zyx", E)))
    else:
        lib.append(_charge("Q11", (1, "y", E), (1, "zyz", E), (t, "xyz", E)))
    lib.append(_charge("Q12", (1, "xx", E), (1, "zyyz", E)))
    lib.append(
        _charge("Q13", (t, "xyyx", E), (1, "xyyz", E), (1, "zyyx", E), (-t, "zyyz", E))
    )
    return lib


def pozsgay_terms() -> list[Charge]:
    """The three individually conserved pieces of the charge at ``V = sigma^x``."""
    E = Bracket.EVEN
    return [
        _charge("[[IxxI]]", (1, "IxxI", E)),
        _charge("[[zyyz]]", (1, "zyyz", E)),
        _charge("[[zzzz]]", (1, "zzzz", E)),
    ]


_ROTATE = {
    # R sigma R^dag with R = exp(-i beta/2 sigma^z)
    "I": lambda c, s: {"I": 1.0},
    "x": lambda c, s: {"x": c, "y": s},
    "y": lambda c, s: {"y": c, "x": -s},
    "z": lambda c, s: {"z": 1.0},
}


def rotate_charge(charge: Charge, beta: float) -> Charge:
    """Conjugate every site by ``exp(-i beta/2 sigma^z)``.

    Maps charges of ``U(V_free(alpha, 0, -))`` onto charges of
    ``U(V_free(alpha, beta, -))``.
    """
    c, s = math.cos(beta), math.sin(beta)
    sums = []
    for ts in charge.sums:
        words = [("", ts.term.coefficient)]
        for letter in ts.term.labels:
            words = [
                (w + a, wc * ac)
                for w, wc in words
                for a, ac in _ROTATE[letter](c, s).items()
                if ac != 0.0
            ]
        for w, wc in words:
            sums.append(TranslationSum(PauliTerm(w, wc), ts.bracket, ts.shift))
    return Charge(sums, charge.name).simplified()


# --- dense operators --------------------------------------------------------


def materialize(charge: Charge, L: int, sparse: bool = False):
    """Operator of ``charge`` on an ``L``-site ring (dense unless ``sparse``)."""
    if charge.support > L:
        raise ValueError(f"support {charge.support} exceeds L={L}")
    Q = sp.csr_matrix((2**L, 2**L), dtype=complex)
    for ts in charge.sums:
        for j in ts.offsets(L):
            Q = Q + ts.coefficient * string_operator(L, ts.term.labels, j)
    return Q if sparse else Q.toarray()


@dataclass
class ConservationCheck:
    conserved: bool
    residual: float


def verify_conserved(U: np.ndarray, charge, L: int, tol: float = 1e-10) -> ConservationCheck:
    """Relative residual ``||U^dag Q U - Q||_F / ||Q||_F``."""
    if U.shape != (2**L, 2**L):
        raise ValueError("unitary does not match L")
    Q = charge if sp.issparse(charge) or isinstance(charge, np.ndarray) else materialize(
        charge, L, sparse=True
    )
    QU = Q @ U
    diff = U.conj().T @ QU - (Q.toarray() if sp.issparse(Q) else Q)
    nq = sp.linalg.norm(Q) if sp.issparse(Q) else np.linalg.norm(Q)
    res = float(np.linalg.norm(diff) / nq)
    return ConservationCheck(res < tol, res)


def commutator_norms(charges, L: int) -> np.ndarray:
    """Table of ``||[Q_i, Q_j]||_F / 2**(L/2)``."""
    ops = [materialize(q, L, sparse=True) for q in charges]
    n = len(ops)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            c = ops[i] @ ops[j] - ops[j] @ ops[i]
            out[i, j] = out[j, i] = sp.linalg.norm(c) / 2 ** (L / 2)
    return out


def charge_expectation(charge: Charge, state, beta: float = 0.0) -> float:
    """``<Q>`` in a state vector or a Gaussian covariance.

    For a covariance, ``beta`` names the frame rotation of the free
    update, as in :func:`goldilocks_qca.gaussian.expectation_string_gaussian`.
    """
    from .gaussian import MajoranaCovariance, majorana_expectation, pauli_to_majorana

    total = 0j
    if isinstance(state, MajoranaCovariance):
        L = state.L
        frame = rotate_charge(charge, -beta) if beta else charge
        for ts in frame.sums:
            for j in ts.offsets(L):
                letters = {}
                for i, a in enumerate(ts.term.labels):
                    if a != "I":
                        letters[(j + i) % L] = a
                if sum(a in "xz" for a in letters.values()) % 2:
                    continue
                coef, idx = pauli_to_majorana(L, letters)
                total += ts.coefficient * coef * majorana_expectation(state.C, idx)
    else:
        psi = np.asarray(state).reshape(-1)
        L = int(round(math.log2(psi.size)))
        for ts in charge.sums:
            for j in ts.offsets(L):
                total += ts.coefficient * string_expectation(psi, L, ts.term.labels, j)
    if abs(total.imag) > 1e-10 * max(1.0, abs(total)):
        raise ArithmeticError(f"imaginary residue {total.imag:.3e} in Hermitian expectation")
    return float(total.real)


# --- sparse Pauli-polynomial search -----------------------------------------


def canonical_strings(n: int):
    """All label strings of support exactly ``n`` (non-identity at both ends)."""
    if n == 1:
        return ["x", "y", "z"]
    return [a + "".join(mid) + b for a in "xyz" for mid in product(LABELS, repeat=n - 2) for b in "xyz"]


def _encode(labels: str, start: int, L: int) -> int:
    code = 0
    for i, c in enumerate(labels):
        code |= LABELS.index(c) << (2 * ((start + i) % L))
    return code


def _decode(code: int, L: int) -> str:
    return "".join(LABELS[(code >> (2 * j)) & 3] for j in range(L))


class _SparsePTM:
    """Column-compressed 64x64 transfer matrix for vectorized expansion."""

    def __init__(self, R: np.ndarray):
        R = np.where(np.abs(R) < 1e-14, 0.0, R)
        csc = sp.csc_matrix(R)
        self.indptr = csc.indptr
        self.rows = csc.indices
        self.vals = csc.data
        self.counts = np.diff(csc.indptr)


def _combine(keys, codes, coefs, L):
    if keys.size == 0:
        return keys, codes, coefs
    compound = keys * (1 << (2 * L)) + codes
    uniq, inv = np.unique(compound, return_inverse=True)
    summed = np.bincount(inv, weights=coefs, minlength=uniq.size)
    keep = np.abs(summed) > DROP_TOL
    uniq = uniq[keep]
    return uniq >> (2 * L), uniq & ((1 << (2 * L)) - 1), summed[keep]


def _apply_gate(keys, codes, coefs, ptm: _SparsePTM, sites, L):
    l, m, r = sites
    dl = (codes >> (2 * l)) & 3
    dm = (codes >> (2 * m)) & 3
    dr = (codes >> (2 * r)) & 3
    a = 16 * dl + 4 * dm + dr
    base = codes - (dl << (2 * l)) - (dm << (2 * m)) - (dr << (2 * r))
    counts = ptm.counts[a]
    rep = np.repeat(np.arange(codes.size), counts)
    first = np.repeat(ptm.indptr[a], counts)
    within = np.arange(rep.size) - np.repeat(np.cumsum(counts) - counts, counts)
    pos = first + within
    e = ptm.rows[pos]
    new = base[rep] + ((e >> 4) << (2 * l)) + (((e >> 2) & 3) << (2 * m)) + ((e & 3) << (2 * r))
    return _combine(keys[rep], new, coefs[rep] * ptm.vals[pos], L)


def _conjugate_layer(keys, codes, coefs, ptm, q, L):
    for t in range(q, L, 2):
        keys, codes, coefs = _apply_gate(keys, codes, coefs, ptm, ((t - 1) % L, t, (t + 1) % L), L)
    return keys, codes, coefs


def _even_rotation_canonical(codes, L):
    """Minimum code over rotations by even numbers of sites, and the stabilizer size."""
    mask = (1 << (2 * L)) - 1
    best = codes.copy()
    stab = np.ones(codes.size, dtype=np.int64)
    for k in range(1, L // 2):
        sh = 4 * k
        rot = ((codes << sh) | (codes >> (2 * L - sh))) & mask
        stab += rot == codes
        best = np.minimum(best, rot)
    return best, stab


@dataclass
class SearchResult:
    dimension: int
    charges: list
    singular_values: np.ndarray
    gap_ratio: float
    certified: bool
    L: int
    support_max: int
    bracket_set: str
    ansatz: list = field(repr=False, default_factory=list)
    null_vectors: np.ndarray | None = field(repr=False, default=None)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "gap_ratio": self.gap_ratio,
            "certified": self.certified,
            "L": self.L,
            "support_max": self.support_max,
            "bracket_set": self.bracket_set,
            "smallest_singular_values": [float(s) for s in self.singular_values[: self.dimension + 5]],
            "charges": [q.to_dict() for q in self.charges],
            "metadata": self.metadata,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def conservation_matrix(V, support_max: int, L: int, rule=UpdateRule.GOLDILOCKS):
    """Sparse matrix of ``A -> G1^dag A G1 - G0 A G0^dag`` on sublattice sums.

    Column ``2i + p`` is the sum of string ``i`` over starts of parity ``p``,
    normalized to unit Hilbert-Schmidt norm; rows are orbits of Pauli
    strings under two-site translations, weighted so that the Euclidean
    norm of a column image equals the Hilbert-Schmidt norm.  The kernel of
    this map equals the kernel of ``A -> U^dag A U - A``.
    """
    gate = neighborhood_gate(np.asarray(V, dtype=complex), rule)
    ptm_adj = _SparsePTM(transfer_matrix(gate, adjoint_first=True))
    ptm_fwd = _SparsePTM(transfer_matrix(gate, adjoint_first=False))
    strings = [t for n in range(1, support_max + 1) for t in canonical_strings(n)]
    ncol = 2 * len(strings)
    # place strings centrally so the three-site gates never straddle the origin needlessly
    base_start = 2
    keys = np.arange(ncol, dtype=np.int64)
    codes = np.array(
        [_encode(s, base_start + p, L) for s in strings for p in (0, 1)], dtype=np.int64
    )
    coefs = np.ones(ncol)
    k1, c1, v1 = _conjugate_layer(keys, codes, coefs, ptm_adj, 1, L)
    k0, c0, v0 = _conjugate_layer(keys, codes, coefs, ptm_fwd, 0, L)
    keys, codes, coefs = _combine(
        np.concatenate([k1, k0]), np.concatenate([c1, c0]), np.concatenate([v1, -v0]), L
    )
    rep, stab = _even_rotation_canonical(codes, L)
    half = L // 2
    # coefficient of each orbit member in the translation sum is stab * (sum over orbit);
    # dividing by sqrt(L/2) normalizes the column, and sqrt(orbit) weights the row
    orbit = half // stab
    compound = keys * (1 << (2 * L)) + rep
    uniq, inv = np.unique(compound, return_inverse=True)
    first = np.zeros(uniq.size, dtype=np.int64)
    first[inv] = np.arange(inv.size)
    vals = np.bincount(inv, weights=coefs, minlength=uniq.size)
    vals = vals * stab[first] * np.sqrt(orbit[first]) / np.sqrt(half)
    cols = uniq >> (2 * L)
    row_codes = uniq & ((1 << (2 * L)) - 1)
    row_ids, rows = np.unique(row_codes, return_inverse=True)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(row_ids.size, ncol))
    return M, strings


def _tsqr_r(M: sp.spmatrix, block: int = 4096) -> np.ndarray:
    """R factor of a tall sparse matrix by blockwise dense QR."""
    n = M.shape[1]
    R = np.zeros((0, n))
    M = M.tocsr()
    for start in range(0, M.shape[0], block):
        blk = M[start : start + block].toarray()
        R = sla.qr(np.vstack([R, blk]), mode="r")[0][:n]
    return R


def search_conserved(
    V,
    support_max: int,
    L: int,
    bracket_set: str = "both",
    rule=UpdateRule.GOLDILOCKS,
    support_measure: str = "cell",
    max_ansatz: int = 4000,
    rel_cutoff: float = SVD_REL_CUTOFF,
) -> SearchResult:
    """Numerical null space of the conservation map on local translation sums.

    Parameters
    ----------
    V : array_like or SingleSiteUnitary
        Single-site update; the one-step unitary is ``U(V)`` under ``rule``.
    support_max : int
        Largest support in the ansatz.
    L : int
        Ring length, at least ``2*support_max + 2`` to avoid aliasing.
    bracket_set : {"both", "full", "even"}
        ``"full"`` restricts to one-site translation-invariant sums,
        ``"even"`` to sums over even starting sites, ``"both"`` allows any
        two-site translation-invariant sum.
    support_measure : {"cell", "string"}
        How the support of a sum is counted.  ``"cell"`` measures windows
        anchored at even sites, so a string starting on an odd site
        occupies one extra site (``[[IA]]`` has support ``len(A) + 1``);
        ``"string"`` counts only the non-identity span.

    Returns
    -------
    SearchResult
        Orthonormal basis of conserved charges and its dimension.  The
        result is ``certified`` when the smallest singular value outside
        the kernel exceeds the largest inside it by ``GAP_CERTIFICATE``.
    """
    if L % 2 or L < 2 * support_max + 2:
        raise ValueError(f"need even L >= {2 * support_max + 2} for support {support_max}")
    if bracket_set not in ("both", "full", "even"):
        raise ValueError("bracket_set must be 'both', 'full' or 'even'")
    if support_measure not in ("cell", "string"):
        raise ValueError("support_measure must be 'cell' or 'string'")
    n_even = support_max
    n_odd = support_max - 1 if support_measure == "cell" else support_max
    nstr = sum(len(canonical_strings(n)) for n in range(1, support_max + 1))
    if 2 * nstr > max_ansatz:
        raise ValueError(f"ansatz dimension {2 * nstr} exceeds cap {max_ansatz}")
    M, strings = conservation_matrix(V, support_max, L, rule)
    n = len(strings)
    lengths = np.array([len(t) for t in strings])
    rows, cols, data = [], [], []
    j = 0
    for i in range(n):
        if bracket_set == "both":
            if lengths[i] <= n_even:
                rows.append(2 * i), cols.append(j), data.append(1.0)
                j += 1
            if lengths[i] <= n_odd:
                rows.append(2 * i + 1), cols.append(j), data.append(1.0)
                j += 1
        elif bracket_set == "even":
            if lengths[i] <= n_even:
                rows.append(2 * i), cols.append(j), data.append(1.0)
                j += 1
        elif lengths[i] <= min(n_even, n_odd):
            rows += [2 * i, 2 * i + 1]
            cols += [j, j]
            data += [1 / np.sqrt(2)] * 2
            j += 1
    P = sp.csr_matrix((data, (rows, cols)), shape=(2 * n, j))
    A = M @ P
    R = _tsqr_r(A)
    _, s, Vh = np.linalg.svd(R)
    s_asc = s[::-1]
    vecs = Vh[::-1].T
    smax = s[0] if s.size and s[0] > 0 else 1.0
    null = s_asc <= rel_cutoff * smax
    dim = int(null.sum())
    largest_null = s_asc[dim - 1] if dim else 0.0
    smallest_kept = s_asc[dim] if dim < s_asc.size else np.inf
    gap = float(smallest_kept / largest_null) if largest_null > 0 else float("inf")
    basis = vecs[:, :dim]
    charges = [
        _vector_to_charge(P @ basis[:, i], strings, L, f"C{i + 1}") for i in range(dim)
    ]
    return SearchResult(
        dimension=dim,
        charges=charges,
        singular_values=s_asc / smax,
        gap_ratio=gap,
        certified=gap > GAP_CERTIFICATE,
        L=L,
        support_max=support_max,
        bracket_set=bracket_set,
        ansatz=strings,
        null_vectors=basis,
        metadata={
            "rows": int(A.shape[0]),
            "columns": int(A.shape[1]),
            "rel_cutoff": rel_cutoff,
            "support_measure": support_measure,
        },
    )


def _vector_to_charge(v, strings, L, name, tol=1e-12) -> Charge:
    """Sublattice coefficients -> sums; ``c_E E + c_O O = c_O [A] + (c_E - c_O) [[A]]``."""
    norm = 1 / math.sqrt(L / 2)
    sums = []
    for i, lab in enumerate(strings):
        ce, co = v[2 * i] * norm, v[2 * i + 1] * norm
        if abs(co) > tol:
            sums.append(TranslationSum(PauliTerm(lab, co), Bracket.FULL))
        if abs(ce - co) > tol:
            sums.append(TranslationSum(PauliTerm(lab, ce - co), Bracket.EVEN))
    return Charge(sums, name)


def span_residual(charges, basis, L: int) -> float:
    """Largest relative distance of ``charges`` from the span of ``basis`` (vectorized on Pauli sums)."""
    def vec(q):
        out = {}
        for ts in q.sums:
            for j in ts.offsets(L):
                key = _encode(ts.term.labels, j, L)
                out[key] = out.get(key, 0.0) + ts.coefficient
        return out

    keys = sorted({k for q in list(charges) + list(basis) for k in vec(q)})
    index = {k: i for i, k in enumerate(keys)}

    def dense(q):
        x = np.zeros(len(keys))
        for k, c in vec(q).items():
            x[index[k]] += c
        return x

    B = np.column_stack([dense(q) for q in basis])
    Qb, _ = np.linalg.qr(B)
    worst = 0.0
    for q in charges:
        x = dense(q)
        r = x - Qb @ (Qb.T @ x)
        worst = max(worst, np.linalg.norm(r) / np.linalg.norm(x))
    return worst


__all__ = [
    "Bracket",
    "PauliTerm",
    "TranslationSum",
    "Charge",
    "charge_library",
    "pozsgay_terms",
    "rotate_charge",
    "materialize",
    "verify_conserved",
    "ConservationCheck",
    "commutator_norms",
    "charge_expectation",
    "canonical_strings",
    "conservation_matrix",
    "search_conserved",
    "SearchResult",
    "span_residual",
]
