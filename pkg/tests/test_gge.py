import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.optimize import brentq

from goldilocks_qca.charges import charge_library, materialize
from goldilocks_qca.core import tilted_ferromagnet, y_ferromagnet
from goldilocks_qca.gge import (
    GGESpec,
    TransferMatrix,
    analytic_single_charge,
    fit_potentials,
    gge_expectation,
    gge_expectations,
    spec_from_potentials,
    time_average,
)
from goldilocks_qca.pauli import string_operator

Q1 = charge_library(0.0)[0]

# frozen from the L=10 13-charge fit (analytic Jacobian); cross-checked with the FD Jacobian
MU_L10 = np.array([0, 0, 0.2235534, -0.62206243, 0, 0, -0.17495563, -0.08747782, 0, 0, 0, 0, 0])
Y_STRINGS_L10 = [0.41302624, 0.16999801, 0.07091548, 0.02943729]


@pytest.mark.parametrize("mu", [-1.2, 0.0, 0.37])
def test_transfer_matrix(mu):
    T = TransferMatrix(mu)
    assert np.allclose(T.entries, T.entries.T)
    assert np.allclose(sorted(np.linalg.eigvalsh(T.entries)), sorted(T.eigenvalues), atol=1e-12)
    L = 6
    Z = np.trace(sla.expm(-mu * materialize(Q1, L))).real
    assert T.partition_function(L) == pytest.approx(Z, rel=1e-12)


def test_analytic_single_charge_limits():
    res = analytic_single_charge(math.pi / 2, 2)
    assert res.mu == pytest.approx(0) and res.prediction == pytest.approx(0)
    assert analytic_single_charge(0.56, 3).prediction == 0
    assert analytic_single_charge(0.56, 2).prediction == pytest.approx(math.cos(0.56) ** 2)
    assert analytic_single_charge(0.0, 2).divergent


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("theta", [0.3, 0.56, 1.0, math.pi / 2])
def test_dense_trace_matches_finite_size_formula(theta, k):
    L = 12
    a = analytic_single_charge(theta, k, L)
    spec = spec_from_potentials([Q1], [a.mu], L)
    assert gge_expectation(spec, "z", k) == pytest.approx(a.prediction, abs=1e-8)


def test_dense_trace_against_matrix_exponential():
    L, mu = 6, -0.4
    rho = sla.expm(-mu * materialize(Q1, L))
    rho /= np.trace(rho)
    obs = sum(string_operator(L, "zz", j).toarray() for j in range(L)) / L
    spec = spec_from_potentials([Q1], [mu], L)
    assert gge_expectation(spec, "z", 2) == pytest.approx(np.trace(rho @ obs).real, abs=1e-12)


def test_infinite_temperature_is_traceless():
    spec = spec_from_potentials(charge_library(0.4)[:3], [0, 0, 0], 8)
    for gamma in "xyz":
        assert np.abs(gge_expectations(spec, gamma, [1, 2, 3])).max() < 1e-12


@pytest.mark.parametrize("theta", [0.56, 1.0])
def test_single_charge_fit_solves_finite_ring_constraint(theta):
    """Independent oracle: on a ring ``<zz> = (r + r^(L-1)) / (1 + r^L)`` with ``r = -tanh(mu)``."""
    L = 10
    spec = fit_potentials([Q1], tilted_ferromagnet(L, theta, 3.7), L)
    assert spec.converged
    c2 = math.cos(theta) ** 2
    r = brentq(lambda r: (r + r ** (L - 1)) / (1 + r**L) - c2, 1e-9, 1 - 1e-12, xtol=1e-15)
    assert spec.mu[0] == pytest.approx(-math.atanh(r), abs=1e-8)


def test_y_ferromagnet_single_charge_fit_is_zero():
    spec = fit_potentials([Q1], y_ferromagnet(8), 8)
    assert abs(spec.mu[0]) < 1e-12


@pytest.fixture(scope="module")
def library_fit_l10():
    return fit_potentials(charge_library(math.pi / 4), y_ferromagnet(10), 10)


def test_library_fit_frozen_values(library_fit_l10):
    spec = library_fit_l10
    assert spec.converged
    assert np.abs(spec.residuals).max() < 1e-8
    assert np.allclose(spec.mu, MU_L10, atol=1e-7)
    assert set(spec.zero_potentials()) >= {f"Q{i}" for i in range(9, 14)}
    assert np.allclose(gge_expectations(spec, "y", [1, 2, 3, 4]), Y_STRINGS_L10, atol=1e-7)


def test_fd_and_analytic_jacobians_agree(library_fit_l10):
    fd = fit_potentials(charge_library(math.pi / 4), y_ferromagnet(10), 10, jacobian="fd")
    assert np.abs(fd.mu - library_fit_l10.mu).max() < 1e-6


def test_spec_validation_and_serialization(library_fit_l10):
    with pytest.raises(ValueError):
        GGESpec([Q1], [0.0, 1.0], 8)
    with pytest.raises(ValueError):
        fit_potentials([Q1], y_ferromagnet(16), 16)
    d = library_fit_l10.to_dict()
    assert d["L"] == 10 and len(d["mu"]) == 13


def test_time_average():
    const = time_average([(t, 0.25) for t in range(20)], (0, 19))
    assert const.mean == 0.25 and const.fluctuation == 0
    alt = time_average([(t, (-1) ** t) for t in range(20)], (0, 19))
    assert alt.mean == 0 and alt.samples == 20
    with pytest.raises(ValueError):
        time_average([(t, 1.0) for t in range(5)], (10, 20))
    with pytest.raises(ValueError):
        time_average([(t, 1.0) for t in range(5)], (0, 4))
