"""Quasienergy spectra resolved by two-site momentum and domain-wall number.

The operator diagonalized in a joint ``(K, q1)`` eigenspace is the
projection of ``Pi G(V, 0)``, a square root of one time step up to a
two-site shift: ``(Pi G)**2 = Pi**2 G(V, 1) G(V, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import UpdateRule, apply_layer
from .symmetry import domain_wall_values, momentum_basis, rotate_bits

MAX_SECTOR_L = 16
UNITARITY_TOL = 1e-8
DEGENERATE_TOL = 1e-12


class SectorLeakageError(RuntimeError):
    """The projected operator is not unitary, so the sector is not invariant."""


@dataclass
class SymmetrySector:
    L: int
    K: int
    q1: int
    basis: object  # scipy.sparse csc, 2**L x N
    reps: np.ndarray

    @property
    def N(self) -> int:
        return int(self.reps.size)

    def residuals(self) -> dict:
        """Orthonormality and eigen-equation residuals of the basis columns."""
        B = self.basis
        out = {"orthonormality": 0.0, "shift": 0.0, "q1": 0.0}
        if self.N == 0:
            return out
        gram = (B.conj().T @ B).toarray()
        out["orthonormality"] = float(np.abs(gram - np.eye(self.N)).max())
        dense = B.toarray()
        idx = np.arange(2**self.L)
        shifted = np.empty_like(dense)
        shifted[rotate_bits(idx, self.L, 2)] = dense
        phase = np.exp(4j * np.pi * self.K / self.L)
        out["shift"] = float(np.abs(shifted - phase * dense).max())
        dw = domain_wall_values(self.L)[:, None]
        out["q1"] = float(np.abs(dw * dense - self.q1 * dense).max())
        return out


def allowed_q1(L: int) -> list:
    return list(range(-L, L + 1, 4))


def sector_basis(L: int, K: int, q1: int) -> SymmetrySector:
    """Orthonormal basis of the joint ``Pi**2 = e^{4 pi i K / L}``, ``Q1 = q1`` eigenspace.

    Basis states are grouped into ``Pi**2`` orbits, the orbits with the
    requested domain-wall value are kept, and each is momentum projected.
    ``K`` is taken modulo ``L/2`` (``K = L/2`` labels the same eigenvalue as 0).

    >>> sector_basis(14, 1, 2).N
    858
    """
    if L % 2 or L < 2:
        raise ValueError("L must be a positive even integer")
    if L > MAX_SECTOR_L:
        raise ValueError(f"sector construction is dense; L <= {MAX_SECTOR_L}")
    if q1 not in allowed_q1(L):
        raise ValueError(f"q1 must lie in {{-L, -L+4, ..., L}}, got {q1}")
    select = domain_wall_values(L) == q1
    B, reps = momentum_basis(L, K, select)
    return SymmetrySector(L, K % (L // 2), q1, B, reps)


def all_sectors(L: int):
    for K in range(L // 2):
        for q1 in allowed_q1(L):
            yield sector_basis(L, K, q1)


@dataclass
class QuasienergySpectrum:
    phases: np.ndarray
    L: int
    K: int
    q1: int
    operator: str = "shift-layer"
    singular_value_deviation: float = 0.0

    @property
    def N(self) -> int:
        return int(self.phases.size)


def _apply_shift(X: np.ndarray, L: int) -> np.ndarray:
    out = np.empty_like(X)
    out[rotate_bits(np.arange(2**L), L, 1)] = X
    return out


def projected_operator(V, sector: SymmetrySector, operator: str = "shift-layer", rule=UpdateRule.GOLDILOCKS, chunk: int = 64):
    """``B^dagger A B`` for ``A = Pi G(V, 0)`` or, as an extension, the full step ``G(V,1) G(V,0)``."""
    if operator not in ("shift-layer", "step"):
        raise ValueError("operator must be 'shift-layer' or 'step'")
    V = np.asarray(V, dtype=complex)
    B = sector.basis
    Bh = B.conj().T.tocsr()
    N, L = sector.N, sector.L
    M = np.empty((N, N), dtype=complex)
    for start in range(0, N, chunk):
        cols = np.ascontiguousarray(B[:, start : start + chunk].toarray())
        apply_layer(cols, L, V, 0, rule)
        if operator == "shift-layer":
            cols = _apply_shift(cols, L)
        else:
            apply_layer(cols, L, V, 1, rule)
        M[:, start : start + chunk] = Bh @ cols
    return M


def sector_quasienergies(V, sector: SymmetrySector, operator: str = "shift-layer", rule=UpdateRule.GOLDILOCKS) -> QuasienergySpectrum:
    """Sorted phases in ``[0, 2 pi)`` of the projected operator.

    Raises
    ------
    SectorLeakageError
        If any singular value of the projected matrix differs from 1 by
        more than ``UNITARITY_TOL``.
    """
    if sector.N == 0:
        raise ValueError("empty sector")
    M = projected_operator(V, sector, operator, rule)
    sv = np.linalg.svd(M, compute_uv=False)
    dev = float(np.abs(sv - 1).max())
    if dev > UNITARITY_TOL:
        raise SectorLeakageError(f"projected operator is not unitary (max |s - 1| = {dev:.3e})")
    ev = np.linalg.eigvals(M)
    phases = np.sort(np.mod(np.angle(ev), 2 * np.pi))
    # angle can return exactly 2 pi after the mod for tiny negative inputs
    phases[phases >= 2 * np.pi] = 0.0
    phases.sort()
    return QuasienergySpectrum(phases, sector.L, sector.K, sector.q1, operator, dev)


@dataclass
class SpacingRatios:
    values: np.ndarray
    degenerate: int
    wrap: bool

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def spacing_ratios(spectrum, wrap: bool = True) -> SpacingRatios:
    """Ratios ``r = min(s_l, s_{l-1}) / max(s_l, s_{l-1})`` of adjacent spacings.

    With ``wrap`` the spacing ``2 pi - (phi_N - phi_1)`` closes the circle
    and every level contributes one ratio. Spacings below
    ``DEGENERATE_TOL`` are counted in ``degenerate``; their ratios are 0.

    >>> spacing_ratios([0.0, 0.1, 0.3], wrap=False).values
    array([0.5])
    """
    phases = np.sort(np.asarray(getattr(spectrum, "phases", spectrum), dtype=float))
    if phases.size < 3:
        raise ValueError("at least three levels are needed")
    s = np.diff(phases)
    if wrap:
        s = np.append(s, 2 * np.pi - (phases[-1] - phases[0]))
        prev, cur = np.roll(s, 1), s
    else:
        prev, cur = s[:-1], s[1:]
    degenerate = int(np.count_nonzero(s < DEGENERATE_TOL))
    lo, hi = np.minimum(prev, cur), np.maximum(prev, cur)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(hi < DEGENERATE_TOL, 0.0, lo / np.where(hi == 0, 1.0, hi))
    r[lo < DEGENERATE_TOL] = 0.0
    return SpacingRatios(r, degenerate, wrap)


def poisson_density(r):
    r = np.asarray(r, dtype=float)
    return 2.0 / (1.0 + r) ** 2


def wigner_dyson_density(r):
    r = np.asarray(r, dtype=float)
    return 6.75 * (r + r * r) / (1.0 + r + r * r) ** 2.5


def _bin_averages(edges, density, exact_cdf=None):
    widths = np.diff(edges)
    if exact_cdf is not None:
        return np.diff(exact_cdf(edges)) / widths
    mass = np.array([integrate.quad(density, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    return mass / widths


@dataclass
class RatioStatistics:
    edges: np.ndarray
    density: np.ndarray
    poisson_ref: np.ndarray
    wd_ref: np.ndarray
    l1_poisson: float
    l1_wd: float
    mean_r: float
    count: int
    meta: dict = field(default_factory=dict)

    @property
    def closer_to(self) -> str:
        return "poisson" if self.l1_poisson < self.l1_wd else "wigner-dyson"

    def rows(self):
        for i in range(self.density.size):
            yield {
                "bin_left": float(self.edges[i]),
                "bin_right": float(self.edges[i + 1]),
                "density": float(self.density[i]),
                "poisson_ref": float(self.poisson_ref[i]),
                "wd_ref": float(self.wd_ref[i]),
            }


HISTOGRAM_COLUMNS = ("bin_left", "bin_right", "density", "poisson_ref", "wd_ref")


def reference_bins(bins: int):
    edges = np.linspace(0.0, 1.0, bins + 1)
    pois = _bin_averages(edges, poisson_density, lambda x: 2 * x / (1 + x))
    wd = _bin_averages(edges, wigner_dyson_density)
    return edges, pois, wd


def _distances(edges, density, pois, wd):
    w = np.diff(edges)
    return float(np.sum(np.abs(density - pois) * w)), float(np.sum(np.abs(density - wd) * w))


def ratio_statistics(ratios, bins: int = 25) -> RatioStatistics:
    """Normalized histogram on ``[0, 1]`` and L1 distances to both reference laws."""
    r = np.asarray(ratios, dtype=float)
    if bins < 1:
        raise ValueError("bins must be positive")
    edges, pois, wd = reference_bins(bins)
    counts, _ = np.histogram(r, bins=edges)
    density = counts / (max(r.size, 1) * np.diff(edges))
    l1p, l1w = _distances(edges, density, pois, wd)
    mean = float(r.mean()) if r.size else math.nan
    return RatioStatistics(edges, density, pois, wd, l1p, l1w, mean, int(r.size))


def median_statistics(stats) -> RatioStatistics:
    """Bin-wise median of several histograms, renormalized, with its distances."""
    stats = list(stats)
    if not stats:
        raise ValueError("no histograms given")
    edges, pois, wd = stats[0].edges, stats[0].poisson_ref, stats[0].wd_ref
    med = np.median(np.stack([s.density for s in stats]), axis=0)
    total = np.sum(med * np.diff(edges))
    if total > 0:
        med = med / total
    l1p, l1w = _distances(edges, med, pois, wd)
    mean = float(np.sum(med * 0.5 * (edges[1:] + edges[:-1]) * np.diff(edges)))
    return RatioStatistics(edges, med, pois, wd, l1p, l1w, mean, sum(s.count for s in stats))


__all__ = [
    "SectorLeakageError",
    "SymmetrySector",
    "sector_basis",
    "all_sectors",
    "QuasienergySpectrum",
    "projected_operator",
    "sector_quasienergies",
    "SpacingRatios",
    "spacing_ratios",
    "poisson_density",
    "wigner_dyson_density",
    "RatioStatistics",
    "ratio_statistics",
    "median_statistics",
    "reference_bins",
    "HISTOGRAM_COLUMNS",
]
