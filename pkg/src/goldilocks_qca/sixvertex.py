"""Six-vertex weights as transition amplitudes of controlled single-site gates.

A plaquette is labelled by the spins ``(m, j, n, l)`` on its west, north,
east and south faces. The weight ``w`` is the amplitude for the target to
go from ``l`` to ``j`` with controls ``m`` (left) and ``n`` (right), and a
gauge ``(w1, w2, w3, w4)`` with unit product rescales it by
``w1**m w2**j w3**n w4**l``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

FEASIBILITY_TOL = 1e-10
GAUGE_TOL = 1e-12


class GaugeConstraintError(ValueError):
    pass


def _pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _unpair(p) -> complex:
    if isinstance(p, (list, tuple)):
        return complex(p[0], p[1])
    return complex(p)


@dataclass(frozen=True)
class VertexWeights:
    a1: complex
    a2: complex
    b1: complex
    b2: complex
    c1: complex
    c2: complex

    def to_dict(self) -> dict:
        return {f.name: _pair(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d) -> "VertexWeights":
        return cls(**{f.name: _unpair(d[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class GaugeFactors:
    w1: complex = 1.0
    w2: complex = 1.0
    w3: complex = 1.0
    w4: complex = 1.0

    @property
    def product(self) -> complex:
        return complex(self.w1 * self.w2 * self.w3 * self.w4)

    @property
    def eps1(self) -> complex:
        return complex(self.w1 * self.w3)

    @property
    def eps2(self) -> complex:
        return complex(self.w1 * self.w1)

    def check(self, tol: float = GAUGE_TOL):
        if abs(self.product - 1) > tol:
            raise GaugeConstraintError(f"gauge product is {self.product}, not 1")

    def to_dict(self) -> dict:
        return {f.name: _pair(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d) -> "GaugeFactors":
        return cls(**{f.name: _unpair(d[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class SixVertexGate:
    """The four controlled transition matrices, keyed by ``(m, n)``."""

    v00: np.ndarray
    v01: np.ndarray
    v10: np.ndarray
    v11: np.ndarray

    def __getitem__(self, mn):
        m, n = mn
        return (self.v00, self.v01, self.v10, self.v11)[2 * m + n]

    def three_site(self) -> np.ndarray:
        """``sum_{m,n} |m><m| (x) V(m,n) (x) |n><n|`` on (left, target, right)."""
        out = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)
        for m in (0, 1):
            for n in (0, 1):
                out[m, :, n, m, :, n] = self[m, n]
        return out.reshape(8, 8)


def gate_from_weights(w: VertexWeights, g: GaugeFactors = GaugeFactors()) -> SixVertexGate:
    """Gauge-scaled transition matrices ``V_6V(m, n)``.

    Raises
    ------
    GaugeConstraintError
        If the gauge factors do not multiply to 1.
    """
    g.check()
    w1, w2, w3, w4 = g.w1, g.w2, g.w3, g.w4
    v00 = np.array([[w.a1, 0], [0, w.a2 * w2 * w4]], dtype=complex)
    v01 = np.array([[w.c2 * w3, w.b2 * w3 * w4], [w.b1 * w2 * w3, w.c1 / w1]], dtype=complex)
    v10 = np.array([[w.c1 * w1, w.b1 * w4 * w1], [w.b2 * w1 * w2, w.c2 / w3]], dtype=complex)
    v11 = np.array([[w.a2 * w1 * w3, 0], [0, w.a1]], dtype=complex)
    return SixVertexGate(v00, v01, v10, v11)


@dataclass(frozen=True)
class ThreeSiteOperator:
    """Assembled neighborhood operator with its explicitly tracked gauge scalar."""

    matrix: np.ndarray
    gauge_scalar: complex


def gauge_diagonals(g: GaugeFactors):
    """``(D_out, D_in)`` with ``u(w, g) = D_out u(w, 1) D_in``."""
    d = lambda z: np.diag([1.0, complex(z)])
    I2 = np.eye(2)
    out = np.kron(np.kron(d(g.w1), d(g.w2)), d(g.w3))
    inn = np.kron(np.kron(I2, d(g.w4)), I2)
    return out, inn


def assemble_three_site(w: VertexWeights, g: GaugeFactors = GaugeFactors()) -> ThreeSiteOperator:
    return ThreeSiteOperator(gate_from_weights(w, g).three_site(), g.product)


def strip_gauge(op: ThreeSiteOperator, g: GaugeFactors) -> np.ndarray:
    """Undo the gauge dressing ``D_out u D_in``; the result depends on the weights only.

    The tracked scalar is divided out as well, so a gauge whose product
    drifted from 1 still compares correctly.
    """
    out, inn = gauge_diagonals(g)
    return np.linalg.solve(out, op.matrix) @ np.linalg.inv(inn) / op.gauge_scalar


def free_fermion_residual(w: VertexWeights) -> complex:
    """``a1 a2 + b1 b2 - c1 c2``."""
    return complex(w.a1 * w.a2 + w.b1 * w.b2 - w.c1 * w.c2)


@dataclass
class GoldilocksSolution:
    feasible: bool
    alpha: float | None = None
    beta: float | None = None
    eps1: int | None = None
    eps2: int | None = None
    phase: float = 0.0
    violated: str | None = None
    residual: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _sign(z: complex, name: str, tol: float):
    for s in (1, -1):
        if abs(z - s) < tol:
            return s, None
    return None, f"{name}=+-1"


def solve_goldilocks(w: VertexWeights, g: GaugeFactors = GaugeFactors(), tol: float = FEASIBILITY_TOL) -> GoldilocksSolution:
    """Check the Goldilocks constraints on gauged weights and extract ``(alpha, beta, eps1, eps2)``.

    The identity blocks force ``a1 = a2 w2 w4 = a2 w1 w3 = 1`` and both
    active blocks must agree with one unitary ``V``. The parameters follow
    from ``c1 w1 = e^{i phase} cos(alpha)``, ``b1 w1 eps1 = i e^{i phase} sin(alpha)``
    and ``w2 eps2 = -i e^{i beta}``; ``phase`` is 0 for the canonical family.
    The first violated condition is reported by name.
    """

    def fail(name, value):
        return GoldilocksSolution(False, violated=name, residual=float(value))

    if abs(g.product - 1) > tol:
        return fail("w1 w2 w3 w4=1", abs(g.product - 1))
    checks = [
        ("a1=1", w.a1 - 1),
        ("a2 w2 w4=1", w.a2 * g.w2 * g.w4 - 1),
        ("a2 w1 w3=1", w.a2 * g.w1 * g.w3 - 1),
    ]
    for name, r in checks:
        if abs(r) > tol:
            return fail(name, abs(r))
    gate = gate_from_weights(w, g)
    comps = [("<0|V|0>", (0, 0)), ("<0|V|1>", (0, 1)), ("<1|V|0>", (1, 0)), ("<1|V|1>", (1, 1))]
    for name, ij in comps:
        r = abs(gate.v01[ij] - gate.v10[ij])
        if r > tol:
            return fail(name, r)
    eps1, bad = _sign(g.eps1, "eps1", tol)
    if bad:
        return fail(bad, abs(abs(g.eps1) - 1))
    eps2, bad = _sign(g.eps2, "eps2", tol)
    if bad:
        return fail(bad, abs(abs(g.eps2) - 1))
    side = [
        ("|w2|^2=1", abs(g.w2) ** 2 - 1),
        ("|c1|^2+|b1|^2=1", abs(w.c1) ** 2 + abs(w.b1) ** 2 - 1),
        ("c1* b1 + c1 b1*=0", 2 * (np.conj(w.c1) * w.b1).real),
    ]
    for name, r in side:
        if abs(r) > tol:
            return fail(name, abs(r))
    p = complex(w.c1 * g.w1)
    q = complex(-1j * w.b1 * g.w1 * eps1)
    # p = e^{i phase} cos(alpha), q = e^{i phase} sin(alpha)
    e2 = p * p + q * q
    phase = cmath.phase(e2) / 2
    if phase <= -math.pi / 2 + 1e-15:
        phase += math.pi
    if abs(phase) < tol:
        phase = 0.0
    rot = cmath.exp(-1j * phase)
    alpha = math.atan2((q * rot).real, (p * rot).real)
    beta = cmath.phase(1j * g.w2 * eps2)
    return GoldilocksSolution(True, alpha, beta, eps1, eps2, phase)


def canonical_gauge(beta: float, eps1: int, eps2: int) -> GaugeFactors:
    """``w1 = 1`` when ``eps2 = +1`` and ``w1 = i`` when ``eps2 = -1``; the rest follow."""
    w1 = 1.0 + 0j if eps2 == 1 else 1j
    w3 = eps1 / w1
    w2 = -1j * cmath.exp(1j * beta) * eps2
    w4 = eps1 / w2
    return GaugeFactors(w1, w2, w3, w4)


def weights_from_vfree(alpha: float, beta: float, eps1: int, eps2: int):
    """Weights and canonical gauge realizing ``V_free(alpha, beta, eps2)`` on the active blocks.

    Returns
    -------
    (VertexWeights, GaugeFactors)
    """
    if eps1 not in (1, -1) or eps2 not in (1, -1):
        raise ValueError("eps1 and eps2 must be +1 or -1")
    g = canonical_gauge(beta, eps1, eps2)
    c1 = math.cos(alpha) / g.w1
    b1 = 1j * math.sin(alpha) * eps1 / g.w1
    c2 = math.cos(alpha) / g.w3
    b2 = b1 * g.w1 / g.w3
    w = VertexWeights(1.0 + 0j, complex(eps1), complex(b1), complex(b2), complex(c1), complex(c2))
    return w, g


def to_json(w: VertexWeights, g: GaugeFactors, **kw) -> str:
    return json.dumps({"weights": w.to_dict(), "gauge": g.to_dict()}, **kw)


def from_json(text: str):
    d = json.loads(text)
    return VertexWeights.from_dict(d["weights"]), GaugeFactors.from_dict(d["gauge"])


__all__ = [
    "VertexWeights",
    "GaugeFactors",
    "GaugeConstraintError",
    "SixVertexGate",
    "gate_from_weights",
    "ThreeSiteOperator",
    "assemble_three_site",
    "gauge_diagonals",
    "strip_gauge",
    "free_fermion_residual",
    "GoldilocksSolution",
    "solve_goldilocks",
    "canonical_gauge",
    "weights_from_vfree",
    "to_json",
    "from_json",
]
