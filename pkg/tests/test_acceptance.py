"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one PASS/FAIL line through the ``report`` fixture.
"""

import itertools
import math

import numpy as np
import pytest

from goldilocks_qca.charges import (
    charge_library,
    pozsgay_terms,
    search_conserved,
    verify_conserved,
)
from goldilocks_qca.core import (
    CircuitSpec,
    cz_layer_diagonal,
    decomposed_neighborhood_gate,
    expectation_string,
    iter_evolution,
    layer_matrix,
    make_single_site_unitary,
    neighborhood_gate,
    sample_random_unitary,
    step_matrix,
    tilted_ferromagnet,
    vfree_matrix,
    y_ferromagnet,
)
from goldilocks_qca.gaussian import build_step, frame_vacuum_state, string_series, vacuum_covariance
from goldilocks_qca.gge import (
    analytic_single_charge,
    fit_potentials,
    gge_expectation,
    gge_expectations,
    spec_from_potentials,
    time_average,
)
from goldilocks_qca.sixvertex import free_fermion_residual, gate_from_weights, solve_goldilocks, weights_from_vfree
from goldilocks_qca.spectra import median_statistics, ratio_statistics, sector_basis, sector_quasienergies, spacing_ratios

VPRIME = dict(a=0.3 + 0.7j, b=-1.0 - 0.5j)
GENERIC_PLUS_ALPHAS = (0.37, 1.1)


def test_criterion_01_gaussian_matches_state_vector(report):
    ks = [1, 2, 3, 4]
    worst = 0.0
    grid = itertools.product([0.3, math.pi / 4, 1.2], [0.0, 0.9], [1, -1], [6, 8, 10])
    for alpha, beta, sign, L in grid:
        step = build_step(alpha, beta, sign, L)
        gauss = string_series(vacuum_covariance(L), step, 20, "y", ks)
        spec = CircuitSpec(L, make_single_site_unitary(alpha, beta, sign))
        # beta = 0: the y-ferromagnet itself; otherwise its image in the rotated frame
        psi0 = y_ferromagnet(L) if beta == 0 else frame_vacuum_state(L, beta)
        for t, psi in iter_evolution(psi0, spec, 20):
            exact = [expectation_string(psi, L, "y", k) for k in ks]
            worst = max(worst, np.abs(gauss[t] - exact).max())
    ok = worst < 1e-9
    report(1, ok, f"max |F_gauss - F_exact| = {worst:.2e} over 36 configurations (tol 1e-9)")
    assert ok


def test_criterion_02_charge_counts(report):
    L, n = 12, 5
    found = {
        "V_free(pi/4,0,-)": (search_conserved(vfree_matrix(math.pi / 4, 0, -1), n, L).dimension, 13),
        "V_free(pi/2,0,+)": (search_conserved(vfree_matrix(math.pi / 2, 0, 1), n, L).dimension, 24),
        "V'": (search_conserved(make_single_site_unitary(**VPRIME).matrix, n, L).dimension, 1),
    }
    for a in GENERIC_PLUS_ALPHAS:
        found[f"V_free({a},0,+)"] = (search_conserved(vfree_matrix(a, 0, 1), n, L).dimension, 9)
    ok = all(got == want for got, want in found.values())
    detail = ", ".join(f"{k}: {g} (want {w})" for k, (g, w) in found.items())
    report(2, ok, detail)
    assert ok


def test_criterion_03_conservation_residuals(report):
    worst_lib = 0.0
    for L in (8, 10):
        for alpha in (0.3, math.pi / 4, 1.0):
            U = step_matrix(L, make_single_site_unitary(alpha, 0.0, -1))
            worst_lib = max(worst_lib, max(verify_conserved(U, q, L).residual for q in charge_library(alpha)))
    q1 = charge_library(0.0)[0]
    worst_q1 = max(
        verify_conserved(step_matrix(8, sample_random_unitary(seed)), q1, 8).residual for seed in range(20)
    )
    ok = worst_lib < 1e-10 and worst_q1 < 1e-10
    report(3, ok, f"library max residual {worst_lib:.1e}, Q1 vs 20 random V' {worst_q1:.1e} (tol 1e-10)")
    assert ok


def test_criterion_04_pozsgay_terms(report):
    L = 8
    U = step_matrix(L, vfree_matrix(math.pi / 2, 0, -1))
    res = [verify_conserved(U, q, L).residual for q in pozsgay_terms()]
    ok = max(res) < 1e-10
    report(4, ok, "residuals " + ", ".join(f"{r:.1e}" for r in res) + " at V = sigma^x (tol 1e-10)")
    assert ok


def test_criterion_05_single_charge_gge(report):
    L = 12
    q1 = charge_library(0.0)[:1]
    fit_err, pred_err, odd = 0.0, 0.0, 0.0
    for theta in (0.3, 0.56, 1.0):
        a = analytic_single_charge(theta, 2)
        fit = fit_potentials(q1, tilted_ferromagnet(L, theta, 3.7), L)
        fit_err = max(fit_err, abs(fit.mu[0] - a.mu))
        spec = spec_from_potentials(q1, [a.mu], L)
        for k in (1, 2, 3, 4):
            dense = gge_expectation(spec, "z", k)
            pred_err = max(pred_err, abs(dense - analytic_single_charge(theta, k, L).prediction))
            if k % 2:
                odd = max(odd, abs(dense))
    ok = fit_err < 1e-6 and pred_err < 1e-8 and odd < 1e-10
    report(
        5,
        ok,
        f"|mu_fit(L=12) + artanh(cos^2)| = {fit_err:.2e} (tol 1e-6); "
        f"formula vs trace {pred_err:.1e} (tol 1e-8); odd k {odd:.1e} (tol 1e-10)",
    )
    assert ok


def test_criterion_06_free_equilibration(report):
    L, ks = 256, [1, 2, 3, 4]
    F = string_series(vacuum_covariance(L), build_step(math.pi / 4, 0, -1, L), 200, "y", ks)
    avgs = [time_average([(t, F[t, i]) for t in range(201)], (50, 200)) for i in range(len(ks))]
    spec = fit_potentials(charge_library(math.pi / 4), y_ferromagnet(12), 12)
    pred = gge_expectations(spec, "y", ks)
    within = all(abs(a.mean - p) < 3 * a.fluctuation for a, p in zip(avgs, pred))
    means = [abs(a.mean) for a in avgs]
    noise = [a.fluctuation / math.sqrt(a.samples) for a in avgs]
    monotone = all(means[i + 1] < means[i] + 3 * noise[i + 1] for i in range(len(ks) - 1))
    ok = spec.converged and within and monotone
    detail = "; ".join(f"k={k}: {a.mean:.4f}+-{a.fluctuation:.4f} vs GGE {p:.4f}" for k, a, p in zip(ks, avgs, pred))
    report(6, ok, detail + f"; monotone={monotone}")
    assert ok


def test_criterion_07_generic_thermalization(report):
    medians = {}
    for L in (10, 14, 18):
        psi0 = tilted_ferromagnet(L, 0.56, 3.7)
        avgs = []
        for seed in range(20):
            spec = CircuitSpec(L, sample_random_unitary(seed))
            vals = [expectation_string(psi, L, "z", 3) for t, psi in iter_evolution(psi0, spec, 20) if t >= 5]
            avgs.append(np.mean(vals))
        medians[L] = abs(float(np.median(avgs)))
    m = [medians[L] for L in (10, 14, 18)]
    ok = m[0] > m[1] > m[2]
    report(7, ok, "median |<F(t;z,3)>_t| " + ", ".join(f"L={L}: {v:.4f}" for L, v in medians.items()))
    assert ok


def test_criterion_08_sector_dimensions(report):
    n16 = sector_basis(16, 1, 0).N
    n14 = sector_basis(14, 1, 2).N
    ok = n16 == 3200 and n14 == 858
    report(8, ok, f"N(16,1,0) = {n16}, N(14,1,2) = {n14}")
    assert ok


def test_criterion_09_level_statistics(report):
    sector = sector_basis(14, 1, 2)
    free = ratio_statistics(spacing_ratios(sector_quasienergies(vfree_matrix(math.pi / 4, 0, -1), sector)))
    generic = median_statistics(
        ratio_statistics(spacing_ratios(sector_quasienergies(sample_random_unitary(seed), sector)))
        for seed in range(20)
    )
    ok = free.l1_poisson < free.l1_wd and generic.l1_wd < generic.l1_poisson
    report(
        9,
        ok,
        f"free: L1(P)={free.l1_poisson:.3f} L1(WD)={free.l1_wd:.3f}; "
        f"median of 20 V': L1(P)={generic.l1_poisson:.3f} L1(WD)={generic.l1_wd:.3f}",
    )
    assert ok


def test_criterion_10_six_vertex_round_trip(report):
    rng = np.random.default_rng(2024)
    worst_p = worst_ff = worst_gate = 0.0
    feasible = True
    for _ in range(100):
        alpha, beta = rng.uniform(-math.pi, math.pi, 2)
        e1, e2 = (int(x) for x in rng.choice([1, -1], 2))
        w, g = weights_from_vfree(alpha, beta, e1, e2)
        sol = solve_goldilocks(w, g)
        feasible &= sol.feasible and (sol.eps1, sol.eps2) == (e1, e2)
        if sol.feasible:
            dbeta = (sol.beta - beta + math.pi) % (2 * math.pi) - math.pi
            worst_p = max(worst_p, abs(sol.alpha - alpha), abs(dbeta))
        worst_ff = max(worst_ff, abs(free_fermion_residual(w)))
        gate = gate_from_weights(w, g).three_site()
        worst_gate = max(worst_gate, np.abs(gate - neighborhood_gate(vfree_matrix(alpha, beta, e2))).max())
    ok = feasible and worst_p < 1e-10 and worst_ff < 1e-12 and worst_gate < 1e-12
    report(10, ok, f"params {worst_p:.1e} (1e-10), a1a2+b1b2-c1c2 {worst_ff:.1e} (1e-12), gate {worst_gate:.1e} (1e-12)")
    assert ok


def test_criterion_11_decomposition_identities(report):
    alphas = np.random.default_rng(11).uniform(-math.pi, math.pi, 20)
    gate_err = max(
        np.abs(neighborhood_gate(vfree_matrix(a, 0, -1)) - decomposed_neighborhood_gate(a)).max() for a in alphas
    )
    L, cz = 6, cz_layer_diagonal(6)
    red_err = 0.0
    for a in alphas:
        for q in (0, 1):
            lhs = layer_matrix(L, vfree_matrix(a, 0, 1), q)
            rhs = cz[:, None] * layer_matrix(L, vfree_matrix(-a, 0, -1), q)
            red_err = max(red_err, np.abs(lhs - rhs).max())
    ok = gate_err < 1e-12 and red_err < 1e-12
    report(11, ok, f"gate factorization {gate_err:.1e}, CZ-layer reduction {red_err:.1e} (tol 1e-12)")
    assert ok
