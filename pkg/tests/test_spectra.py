import math

import numpy as np
import pytest
from scipy.integrate import quad

from goldilocks_qca.core import layer_matrix, sample_random_unitary, shift_matrix, vfree_matrix
from goldilocks_qca.spectra import (
    SectorLeakageError,
    all_sectors,
    median_statistics,
    poisson_density,
    projected_operator,
    ratio_statistics,
    reference_bins,
    sector_basis,
    sector_quasienergies,
    spacing_ratios,
    wigner_dyson_density,
)


@pytest.mark.parametrize("L", [4, 6, 8, 10])
def test_sectors_partition_hilbert_space(L):
    assert sum(s.N for s in all_sectors(L)) == 2**L


@pytest.mark.parametrize("L,K,q1,N", [(16, 1, 0, 3200), (14, 1, 2, 858)])
def test_sector_dimensions(L, K, q1, N):
    assert sector_basis(L, K, q1).N == N


@pytest.mark.parametrize("K,q1", [(0, 0), (1, -4), (3, 4), (2, 8)])
def test_sector_residuals(K, q1):
    res = sector_basis(8, K, q1).residuals()
    assert max(res.values()) < 1e-12


def test_sector_validation():
    with pytest.raises(ValueError):
        sector_basis(8, 1, 2)
    with pytest.raises(ValueError):
        sector_basis(18, 1, 2)
    assert sector_basis(8, 4, 0).K == 0


@pytest.mark.parametrize("operator", ["shift-layer", "step"])
def test_projected_operator_against_dense(operator):
    L = 8
    sector = sector_basis(L, 1, 0)
    V = sample_random_unitary(4).matrix
    if operator == "shift-layer":
        A = shift_matrix(L, 1) @ layer_matrix(L, V, 0)
    else:
        A = layer_matrix(L, V, 1) @ layer_matrix(L, V, 0)
    B = sector.basis.toarray()
    dense = B.conj().T @ A @ B
    assert np.abs(projected_operator(V, sector, operator) - dense).max() < 1e-12


def test_square_of_shift_layer_is_momentum_times_step():
    L, K = 8, 1
    sector = sector_basis(L, K, 0)
    V = sample_random_unitary(9).matrix
    half = sector_quasienergies(V, sector)
    full = sector_quasienergies(V, sector, operator="step")
    squared = np.exp(2j * half.phases) * np.exp(-4j * np.pi * K / L)
    got = np.sort(np.mod(np.angle(squared), 2 * np.pi))
    diff = np.abs(np.exp(1j * got) - np.exp(1j * full.phases))
    assert diff.max() < 1e-9


def test_identity_update_gives_shift_phases():
    L, K = 10, 2
    spec = sector_quasienergies(np.eye(2), sector_basis(L, K, 2))
    allowed = np.exp(2j * np.pi * K / L) * np.array([1, -1])
    dist = np.abs(np.exp(1j * spec.phases)[:, None] - allowed[None, :]).min(axis=1)
    assert dist.max() < 1e-10
    assert spec.singular_value_deviation < 1e-12


def test_non_conserving_rule_leaks():
    with pytest.raises(SectorLeakageError):
        sector_quasienergies(sample_random_unitary(0).matrix, sector_basis(8, 1, 0), rule="pxp")


def test_spacing_ratio_examples():
    assert spacing_ratios([0.0, 0.1, 0.3], wrap=False).values == pytest.approx([0.5], abs=1e-12)
    eq = spacing_ratios(np.linspace(0, 2 * np.pi, 12, endpoint=False))
    assert np.allclose(eq.values, 1.0) and len(eq) == 12
    deg = spacing_ratios([0.0, 0.0, 1.0, 2.5], wrap=False)
    assert deg.degenerate == 1 and deg.values[0] == 0.0
    with pytest.raises(ValueError):
        spacing_ratios([0.0, 1.0])


def test_uniform_phases_follow_poisson_mean():
    phases = np.random.default_rng(0).uniform(0, 2 * np.pi, 10_000)
    r = spacing_ratios(phases)
    assert abs(np.mean(r.values) - (2 * math.log(2) - 1)) < 0.01
    stats = ratio_statistics(r)
    assert stats.closer_to == "poisson"


def test_reference_densities():
    assert poisson_density(1.0) == pytest.approx(0.5)
    assert wigner_dyson_density(0.0) == 0
    assert quad(poisson_density, 0, 1)[0] == pytest.approx(1.0)
    assert quad(wigner_dyson_density, 0, 1)[0] == pytest.approx(1.0)
    edges, pois, wd = reference_bins(20)
    assert np.sum(pois * np.diff(edges)) == pytest.approx(1.0)
    assert np.sum(wd * np.diff(edges)) == pytest.approx(1.0)


def test_ratio_statistics_and_median():
    rng = np.random.default_rng(1)
    stats = [ratio_statistics(rng.uniform(0, 1, 500), bins=10) for _ in range(3)]
    assert all(np.sum(s.density * np.diff(s.edges)) == pytest.approx(1.0) for s in stats)
    med = median_statistics(stats)
    assert np.sum(med.density * np.diff(med.edges)) == pytest.approx(1.0)
    assert med.count == 1500
    assert len(list(med.rows())) == 10
    with pytest.raises(ValueError):
        median_statistics([])


def test_free_update_has_degenerate_levels():
    spec = sector_quasienergies(vfree_matrix(math.pi / 4, 0, -1), sector_basis(12, 1, 0))
    assert spacing_ratios(spec).degenerate > 0
