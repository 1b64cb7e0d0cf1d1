"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL ...`` line (shown even when
pytest captures output) and then asserts.
"""

import math
import time

import numpy as np
import pytest

from oracles import bessel_i_series, bessel_k_series
from weaktree.asymptotics import d2_fit, log_grid, supercritical_check, weak_sweep_fit, weyl_check
from weaktree.birman_schwinger import (
    b0_channel,
    bargmann_bound,
    cor1_bound,
    hs_convergence,
    solve_weak_eigenvalue,
)
from weaktree.decomposition import assemble_negative_spectrum, build_channels, compare_spectra
from weaktree.direct import build_graph_matrix, direct_negative_spectrum
from weaktree.halfline import Channel, Numerics, PowerWeight, solve_channel
from weaktree.potentials import gaussian_well, square_well
from weaktree.special import bessel_ik, spectral_constants
from weaktree.tree import RegularTree, TreeWeight, make_geometric_tree, make_half_line

WELL = square_well(-1.0, 0.0, 1.0)
GAUSS = gaussian_well(-1.0, 1.0)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.fixture(scope="module")
def weak_sweep():
    tree = make_geometric_tree(1.5, 2)
    with Timer() as t:
        rep = weak_sweep_fit(tree, GAUSS, 1.5, log_grid(1e-3, 1e-2, 8))
    return rep, t.elapsed


def test_criterion_01_decomposition_matches_direct(report):
    tree = RegularTree((1.0, 2.0), (2, 2))
    V = square_well(-1.0, 0.0, 3.0)
    lam, L, h = 25.0, 6.0, 0.01
    with Timer() as t:
        num = Numerics(h=h, L=L, auto_truncate=False, right="dirichlet")
        spec = assemble_negative_spectrum(build_channels(tree, V, lam, 1.0, 2), num)
        M = build_graph_matrix(tree, V, lam, 2, h, L)
        direct = direct_negative_spectrum(M, spec.count + 2)
        match, diff = compare_spectra(spec.eigenvalues, direct.eigenvalues, rel_tol=1e-4)
    mults = [spec.multiplicities[k] for k in sorted(spec.multiplicities)]
    ok = match and diff <= 1e-4 and mults == [1, 1, 2] and t.elapsed < 30
    assert report(1, ok, f"max rel diff {diff:.2e}, {spec.count} eigenvalues, multiplicities {mults}, {t.elapsed:.1f}s")


def test_criterion_02_constants(report):
    worst = 0.0
    for d in (1.0, 1.25, 1.5, 1.75):
        c = spectral_constants(d)
        worst = max(worst, abs(c.K_tilde * (2 - d) - 1), abs(c.C_M * 2 * c.nu + 1))
    c1 = spectral_constants(1.0)
    worst = max(worst, abs(c1.K_tilde - 1), abs(c1.C - 1))
    assert report(2, worst <= 1e-12, f"max deviation {worst:.1e}")


def test_criterion_03_weak_coupling_exponent(report, weak_sweep):
    rep, elapsed = weak_sweep
    ok = len(rep.records) == 8 and abs(rep.slope - 4.0) <= 0.05 * 4.0 and elapsed < 120
    assert report(3, ok, f"slope {rep.slope:.4f} (target 4), {elapsed:.1f}s")


def test_criterion_04_d1_law(report):
    with Timer() as t:
        ch = Channel(0, 0.0, TreeWeight(make_half_line(), 0), "neumann", 1e-2, WELL)
        E = solve_channel(ch).lowest
    rel = abs(E / -1e-4 - 1)
    assert report(4, rel <= 0.02 and t.elapsed < 10, f"E1 {E:.6e}, rel err {rel:.2e}, {t.elapsed:.2f}s")


def test_criterion_05_secular_vs_fd(report):
    worst = 0.0
    for lam in (1e-2, 3e-2):
        sol = solve_weak_eigenvalue(WELL, lam, 1.0)
        fd = solve_channel(b0_channel(WELL, lam, 1.0), Numerics(h=0.005))
        worst = max(worst, abs(sol.kappa / math.sqrt(-fd.lowest) - 1))
    assert report(5, worst <= 1e-3, f"max kappa rel diff {worst:.2e}")


def test_criterion_06_counting_certificates(report):
    half = make_half_line()
    bound = bargmann_bound(WELL, 1.0, 1.0)
    n_dir = solve_channel(Channel(0, 0.0, PowerWeight(1.0, 0.0, 0.0), "dirichlet", 1.0, WELL)).count
    c1 = cor1_bound(WELL, half, 1.0, 1.0)[0]
    n_neu = solve_channel(Channel(0, 0.0, TreeWeight(half, 0), "neumann", 1.0, WELL)).count
    ok = (abs(bound - 0.5) <= 1e-12 and n_dir == 0 and math.floor(bound) == 0
          and abs(c1 - 1.5) <= 1e-12 and n_neu == 1 and n_neu <= math.floor(c1))
    assert report(6, ok, f"Bargmann {bound:.6g} count {n_dir}; Neumann bound {c1:.6g} count {n_neu}")


def test_criterion_07_sandwich(report, weak_sweep):
    rep, _ = weak_sweep
    bad = [r.lam for r in rep.records
           if not (r.E_minus <= r.E1 <= r.E_plus)]
    assert report(7, not bad and len(rep.records) == 8, f"{len(bad)} violations in {len(rep.records)} records")


def test_criterion_08_hs_convergence(report):
    rep = hs_convergence(GAUSS, 1.5, [0.5, 0.1, 0.02])
    ok = rep.decreasing and rep.norms[-1] < 0.05 * rep.m0_norm
    ratios = ", ".join(f"{n / rep.m0_norm:.4f}" for n in rep.norms)
    assert report(8, ok, f"norm ratios to ||M(0)||: {ratios}")


def test_criterion_09_d2_regime(report):
    with Timer() as t:
        rep = d2_fit(make_geometric_tree(2.0, 2), GAUSS, log_grid(0.05, 0.4, 8))
    ok = rep.r2 >= 0.99 and rep.slope < 0 and t.elapsed < 300
    assert report(9, ok, f"R^2 {rep.r2:.5f}, slope {rep.slope:.4f}, {len(rep.fit_lambdas)} points, {t.elapsed:.1f}s")


def test_criterion_10_supercritical_emptiness(report):
    with Timer() as t:
        rep = supercritical_check(make_geometric_tree(2.5, 2), GAUSS, [0.01, 0.1, 1.0, 10.0])
    ok = rep.passed and rep.lambda_star > 0 and rep.first_nonempty > rep.lambda_star and t.elapsed < 300
    assert report(10, ok, f"lambda* {rep.lambda_star:.6g}, nonempty at {rep.first_nonempty:.6g}, {t.elapsed:.1f}s")


def test_criterion_11_weyl(report):
    with Timer() as t:
        rep = weyl_check(make_half_line(), WELL, [1e4])
    ratio = rep.ratios[0]
    ok = 0.9 <= ratio <= 1.1 and t.elapsed < 60
    assert report(11, ok, f"ratio {ratio:.4f}, {t.elapsed:.1f}s")


def test_criterion_12_bessel(report):
    x = np.geomspace(0.01, 20.0, 400)
    i, k = bessel_ik(0.5, x)
    i_ref = np.sqrt(2 / (np.pi * x)) * np.sinh(x)
    k_ref = np.sqrt(np.pi / (2 * x)) * np.exp(-x)
    closed = max(np.max(np.abs(i / i_ref - 1)), np.max(np.abs(k / k_ref - 1)))
    xs = np.geomspace(0.01, 2.0, 60)
    i, k = bessel_ik(0.25, xs)
    series = max(
        max(abs(float(a / bessel_i_series(0.25, v)) - 1) for a, v in zip(i, xs)),
        max(abs(float(b / bessel_k_series(0.25, v)) - 1) for b, v in zip(k, xs)),
    )
    ok = closed <= 1e-10 and series <= 1e-10
    assert report(12, ok, f"closed-form rel err {closed:.1e}, series rel err {series:.1e}")
