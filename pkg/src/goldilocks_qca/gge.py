"""Truncated generalized Gibbs ensembles ``rho = exp(-sum_i mu_i Q_i) / Z``.

Every charge handled here commutes with the two-site shift, so ``rho`` is
block diagonal in momentum sectors of ``Pi**2``; traces are accumulated
block by block from a Hermitian eigendecomposition of the exponent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .charges import Bracket, Charge, PauliTerm, TranslationSum, charge_expectation, materialize
from .symmetry import momentum_blocks

MAX_DENSE_L = 14


@dataclass
class GGESpec:
    charges: list
    mu: np.ndarray
    L: int
    converged: bool = True
    residuals: np.ndarray | None = None
    targets: np.ndarray | None = None
    iterations: int = 0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.mu.shape != (len(self.charges),):
            raise ValueError("one potential per charge is required")

    def zero_potentials(self, tol: float = 1e-6) -> list:
        return [q.name for q, m in zip(self.charges, self.mu) if abs(m) < tol]

    def to_dict(self) -> dict:
        return {
            "charges": [q.name for q in self.charges],
            "mu": self.mu.tolist(),
            "residuals": None if self.residuals is None else np.asarray(self.residuals).tolist(),
            "L": self.L,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class _BlockModel:
    """Momentum-block matrices of a fixed list of charges."""

    def __init__(self, charges, L: int):
        if L % 2 or L > MAX_DENSE_L:
            raise ValueError(f"dense GGE needs even L <= {MAX_DENSE_L}")
        self.L = L
        self.charges = list(charges)
        ops = [materialize(q, L, sparse=True) for q in self.charges]
        self.blocks = []
        for K, B, _ in momentum_blocks(L):
            Bh = B.conj().T.tocsr()
            mats = [(Bh @ (Q @ B)).tocsr() for Q in ops]
            self.blocks.append((K, B, mats))

    def observable_blocks(self, charge):
        Q = materialize(charge, self.L, sparse=True)
        return [(B.conj().T @ (Q @ B)).tocsr() for _, B, _ in self.blocks]

    def spectra(self, mu):
        """Eigen-decompositions of the exponent in every block; energies shifted by the global minimum."""
        out = []
        for _, _, mats in self.blocks:
            H = sum(m * Q for m, Q in zip(mu, mats)).toarray()
            H = 0.5 * (H + H.conj().T)
            E, W = np.linalg.eigh(H)
            out.append((E, W))
        emin = min(E.min() for E, _ in out)
        return [(E - emin, W) for E, W in out]

    def expectations(self, mu, extra=None, jacobian: bool = False):
        """``Tr(rho Q_i)`` (and optionally ``d/dmu_j``) plus expectations of ``extra`` block lists."""
        spec = self.spectra(mu)
        m = len(self.charges)
        Z = 0.0
        vals = np.zeros(m)
        extra_vals = np.zeros(len(extra or []))
        J = np.zeros((m, m))
        cross = np.zeros((m, m))
        for bi, ((E, W), (_, _, mats)) in enumerate(zip(spec, self.blocks)):
            w = np.exp(-E)
            Z += w.sum()
            Wc = W.conj()
            QW = [Q @ W for Q in mats]
            vals += np.array([np.real(np.sum(Wc * X, axis=0)) for X in QW]) @ w
            for ei, blocks in enumerate(extra or []):
                extra_vals[ei] += np.real(np.sum(Wc * (blocks[bi] @ W), axis=0)) @ w
            if jacobian:
                dE = E[:, None] - E[None, :]
                same = np.abs(dE) < 1e-12
                with np.errstate(divide="ignore", invalid="ignore"):
                    g = np.where(same, w[:, None], (w[None, :] - w[:, None]) / np.where(same, 1.0, dE))
                # Kubo-Mori overlaps sum_ab R_i[a,b] g[a,b] R_j[b,a]
                R = np.stack([W.conj().T @ X for X in QW])
                n = E.size
                lhs = (R * g).reshape(m, n * n)
                rhs = np.swapaxes(R, 1, 2).reshape(m, n * n)
                cross += np.real(lhs @ rhs.T)
        vals /= Z
        extra_vals /= Z
        if jacobian:
            cross = 0.5 * (cross + cross.T)
            J = -(cross / Z - np.outer(vals, vals))
        return vals, extra_vals, J


def _target_values(charges, initial) -> np.ndarray:
    return np.array([charge_expectation(q, initial) for q in charges])


def fit_potentials(
    charges,
    initial,
    L: int,
    tol: float = 1e-8,
    max_iter: int = 60,
    jacobian: str = "analytic",
    fd_step: float = 1e-6,
) -> GGESpec:
    """Solve ``Tr(rho(mu) Q_i) = <Psi0|Q_i|Psi0>`` by damped Newton from ``mu = 0``.

    Parameters
    ----------
    charges : list of Charge
    initial : ndarray
        Initial state vector on ``L`` sites.
    tol : float
        Convergence threshold on the largest constraint residual per site.
    jacobian : {"analytic", "fd"}
        Kubo-Mori derivative from the eigendecomposition, or forward
        finite differences with step ``fd_step``.

    Returns
    -------
    GGESpec
        Best iterate; ``converged`` is False when ``max_iter`` is hit.
    """
    if jacobian not in ("analytic", "fd"):
        raise ValueError("jacobian must be 'analytic' or 'fd'")
    model = _BlockModel(charges, L)
    targets = _target_values(charges, initial)
    mu = np.zeros(len(charges))

    def evaluate(x, jac):
        vals, _, J = model.expectations(x, jacobian=jac)
        return vals - targets, J

    res, J = evaluate(mu, jacobian == "analytic")
    it = 0
    for it in range(1, max_iter + 1):
        if np.abs(res).max() / L < tol:
            it -= 1
            break
        if jacobian == "fd":
            J = np.empty((len(mu), len(mu)))
            for j in range(len(mu)):
                dx = np.zeros_like(mu)
                dx[j] = fd_step
                J[:, j] = (evaluate(mu + dx, False)[0] - res) / fd_step
        step = np.linalg.lstsq(J, -res, rcond=1e-12)[0]
        lam = 1.0
        norm0 = np.linalg.norm(res)
        while True:
            trial = mu + lam * step
            r_new, J_new = evaluate(trial, jacobian == "analytic")
            if np.linalg.norm(r_new) < norm0 or lam < 1e-6:
                break
            lam /= 2
        mu, res, J = trial, r_new, J_new
    converged = bool(np.abs(res).max() / L < tol)
    return GGESpec(list(charges), mu, L, converged, res / L, targets, it)


def _string_charge(gamma: str, k: int, L: int) -> Charge:
    """Cyclic average ``(1/L) sum_j (sigma^gamma)^{(x) k}`` as a charge."""
    return Charge([TranslationSum(PauliTerm(gamma * k, 1.0 / L), Bracket.FULL)], f"{gamma}^{k}")


def gge_expectation(spec: GGESpec, gamma: str, k: int, model: _BlockModel | None = None) -> float:
    """``Tr(rho (sigma^gamma)^{(x) k})`` averaged over all offsets."""
    if gamma not in ("x", "y", "z"):
        raise ValueError("gamma must be one of 'x', 'y', 'z'")
    if not 1 <= k <= spec.L:
        raise ValueError("k must lie in [1, L]")
    model = model or _BlockModel(spec.charges, spec.L)
    obs = model.observable_blocks(_string_charge(gamma, k, spec.L))
    _, extra, _ = model.expectations(spec.mu, extra=[obs])
    return float(extra[0])


def gge_expectations(spec: GGESpec, gamma: str, ks) -> np.ndarray:
    """Vectorized :func:`gge_expectation` over several string lengths."""
    model = _BlockModel(spec.charges, spec.L)
    obs = [model.observable_blocks(_string_charge(gamma, k, spec.L)) for k in ks]
    _, extra, _ = model.expectations(spec.mu, extra=obs)
    return extra


@dataclass(frozen=True)
class TransferMatrix:
    """Two-by-two transfer matrix of ``exp(-mu Q1)`` on a ring."""

    mu: float

    @property
    def entries(self) -> np.ndarray:
        m = self.mu
        return np.array([[math.exp(-m), math.exp(m)], [math.exp(m), math.exp(-m)]])

    @property
    def eigenvalues(self) -> tuple[float, float]:
        return 2 * math.cosh(self.mu), -2 * math.sinh(self.mu)

    def partition_function(self, L: int) -> float:
        lp, lm = self.eigenvalues
        return lp**L + lm**L


@dataclass
class SingleChargePrediction:
    mu: float
    prediction: float
    divergent: bool = False


def analytic_single_charge(theta: float, k: int, L=math.inf) -> SingleChargePrediction:
    """Chemical potential and ``Tr(rho (sigma^z)^{(x) k})`` for ``rho ~ exp(-mu Q1)``.

    ``mu = -artanh(cos^2 theta)`` matches ``<Q1>`` of the tilted
    ferromagnet in the thermodynamic limit.

    >>> round(analytic_single_charge(0.56, 3).prediction, 12)
    0.0
    """
    c = math.cos(theta)
    c2 = c * c
    even = (1 + (-1) ** k) / 2
    if abs(c2 - 1.0) < 1e-15:
        return SingleChargePrediction(-math.inf, even * 1.0, divergent=True)
    mu = -math.atanh(c2)
    if math.isinf(L):
        pred = even * c**k
    else:
        pred = even * (c**k + c ** (2 * L - k)) / (1 + c ** (2 * L))
    return SingleChargePrediction(mu, pred)


def spec_from_potentials(charges, mu, L: int) -> GGESpec:
    return GGESpec(list(charges), np.asarray(mu, dtype=float), L)


@dataclass
class TimeAverage:
    mean: float
    fluctuation: float
    samples: int = 0


def time_average(series, window) -> TimeAverage:
    """Mean and standard deviation of ``(t, value)`` pairs with ``t0 <= t <= t1``."""
    t0, t1 = window
    arr = np.asarray(list(series), dtype=float).reshape(-1, 2)
    sel = arr[(arr[:, 0] >= t0) & (arr[:, 0] <= t1), 1]
    if sel.size == 0:
        raise ValueError("window contains no samples")
    if sel.size < 10:
        raise ValueError(f"window holds only {sel.size} samples; at least 10 are required")
    return TimeAverage(float(sel.mean()), float(sel.std()), int(sel.size))


__all__ = [
    "GGESpec",
    "fit_potentials",
    "gge_expectation",
    "gge_expectations",
    "TransferMatrix",
    "analytic_single_charge",
    "SingleChargePrediction",
    "spec_from_potentials",
    "time_average",
    "TimeAverage",
]
