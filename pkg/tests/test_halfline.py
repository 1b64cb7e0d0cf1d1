import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import dirichlet_well_states, free_count, neumann_well_even_state
from weaktree.errors import BadGridError
from weaktree.halfline import (
    Channel,
    Numerics,
    PowerWeight,
    count_negative,
    discretize_form,
    lowest_eigenvalues,
    make_grid,
    solve_channel,
    sturm_count,
    zero_energy_count,
)
from weaktree.potentials import gaussian_well, square_well
from weaktree.tree import TreeWeight, make_geometric_tree

ZERO = square_well(0.0, 0.0, 1.0)
WELL = square_well(-1.0, 0.0, 1.0)


def well_channel(lam, boundary="neumann", weight=None, V=WELL):
    return Channel(0, 0.0, weight or PowerWeight(), boundary, lam, V)


def test_free_dirichlet_matrix_is_standard_stencil():
    h = 0.01
    pen = discretize_form(well_channel(0.0, "dirichlet", V=ZERO), make_grid(0.0, 1.0, h))
    D = pen.dense()
    n = D.shape[0]
    assert n == 99
    np.testing.assert_allclose(np.diag(D), 2 / h**2, rtol=1e-9)
    np.testing.assert_allclose(np.diag(D, 1), -1 / h**2, rtol=1e-9)


def test_free_dirichlet_spectrum():
    pen = discretize_form(well_channel(0.0, "dirichlet", V=ZERO), make_grid(0.0, 1.0, 0.001))
    res = lowest_eigenvalues(pen, 3)
    assert res.eigenvalues == ()
    np.testing.assert_allclose(res.values, [math.pi**2 * j * j for j in (1, 2, 3)], rtol=1e-4)


def test_bisection_matches_dense_solver():
    ch = well_channel(7.0, "neumann", PowerWeight(1.0, 0.5), gaussian_well(-1.0, 1.0) + square_well(0.5, 2.0, 3.0))
    pen = discretize_form(ch, make_grid(0.0, 8.0, 0.05, ch.breakpoints(0, 8)))
    ref = np.linalg.eigvalsh(pen.dense())
    got = lowest_eigenvalues(pen, 6).values
    np.testing.assert_allclose(got, ref[:6], rtol=1e-10, atol=1e-12)
    for s in [-3.0, -0.5, 0.0, 1.0, 10.0]:
        assert sturm_count(pen, s) == int(np.sum(ref < s))


@given(st.floats(0.0, 2.0), st.sampled_from(["neumann", "dirichlet"]))
def test_nonnegative_form_without_potential(alpha, bc):
    ch = well_channel(0.0, bc, PowerWeight(1.0, alpha), ZERO)
    pen = discretize_form(ch, make_grid(0.0, 10.0, 0.1))
    assert lowest_eigenvalues(pen, 1).values[0] >= -1e-10
    assert sturm_count(pen, 0.0) == 0


def test_repulsive_potential_gives_empty_list():
    res = solve_channel(well_channel(5.0, V=square_well(1.0, 0.0, 1.0)))
    assert res.eigenvalues == () and res.count == 0


def test_zero_coupling():
    ch = well_channel(0.0)
    assert count_negative(ch, make_grid(0.0, 5.0, 0.05)) == 0
    assert solve_channel(ch).eigenvalues == ()


def test_second_order_convergence():
    ch = well_channel(5.0)
    E = []
    for h in (0.04, 0.02, 0.01):
        pen = discretize_form(ch, make_grid(0.0, 12.0, h, [1.0]))
        E.append(lowest_eigenvalues(pen, 1).values[0])
    ratio = (E[0] - E[1]) / (E[1] - E[2])
    assert 3.6 < ratio < 4.4


def test_neumann_even_state_oracle():
    res = solve_channel(well_channel(1.0), Numerics(h=0.0025))
    assert len(res.eigenvalues) == 1
    assert res.lowest == pytest.approx(neumann_well_even_state(1.0), rel=1e-4)
    assert res.bracket_width < 1e-4


def test_richardson_improves_accuracy():
    exact = neumann_well_even_state(4.0)
    plain = solve_channel(well_channel(4.0), Numerics(h=0.02)).lowest
    rich = solve_channel(well_channel(4.0), Numerics(h=0.02, richardson=True)).lowest
    assert abs(rich - exact) < 0.1 * abs(plain - exact)


def test_counts_at_unit_depth():
    grid = make_grid(0.0, 10.0, 0.01, [1.0])
    assert count_negative(well_channel(1.0, "dirichlet"), grid) == 0
    assert count_negative(well_channel(1.0, "neumann"), grid) == 1


@pytest.mark.parametrize("lam", [10.0, 30.0, 100.0])
def test_dirichlet_states_oracle(lam):
    ref = dirichlet_well_states(lam)
    res = solve_channel(well_channel(lam, "dirichlet"), Numerics(h=0.0025))
    assert res.count == len(ref)
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=2e-4)


@given(st.floats(0.05, 120.0))
def test_counts_match_oracle(lam):
    r = math.sqrt(lam) / math.pi
    # stay away from coupling thresholds where the count jumps
    assume(min(abs(r - round(r)), abs(r - math.floor(r) - 0.5)) > 0.02)
    neumann, dirichlet = free_count(lam)
    grid = make_grid(0.0, 6.0, 0.01, [1.0])
    assert count_negative(well_channel(lam, "neumann"), grid) == neumann
    assert count_negative(well_channel(lam, "dirichlet"), grid) == dirichlet


@given(st.floats(0.25, 4.0), st.floats(0.0, 1.5), st.floats(2.0, 40.0))
def test_scaling_covariance(c, alpha, lam):
    # t -> c t with weight t^alpha: V_c(t) = V(t/c)/c^2 has eigenvalues E/c^2,
    # exactly at the discrete level when the grid is scaled as well
    w = PowerWeight(1.0, alpha, 0.0)
    base = Channel(0, 0.0, w, "neumann", lam, WELL)
    scaled = Channel(0, 0.0, w, "neumann", lam / c**2, square_well(-1.0, 0.0, c))
    g1 = make_grid(0.0, 8.0, 0.05, [1.0])
    g2 = make_grid(0.0, 8.0 * c, 0.05 * c, [c])
    e1 = lowest_eigenvalues(discretize_form(base, g1), 2).values
    e2 = lowest_eigenvalues(discretize_form(scaled, g2), 2).values
    np.testing.assert_allclose(np.asarray(e2) * c**2, e1, rtol=1e-8, atol=1e-10)


def test_zero_energy_count_matches_long_truncation():
    ch = well_channel(30.0)
    grid = make_grid(0.0, 4.0, 0.01, [1.0])
    pen = discretize_form(ch, grid)
    n = zero_energy_count(pen, ch.weight)
    long_pen = discretize_form(ch, make_grid(0.0, 4000.0, 0.01, [1.0], core_end=1.0, growth=1.05, h_max=5.0))
    assert n == sturm_count(long_pen.with_right("neumann"), 0.0) == 2


def test_zero_energy_count_transient_weight():
    # weight (1+t)^2 has finite int dt/w: a weak well gives no bound state
    ch = Channel(0, 0.0, PowerWeight(1.0, 2.0), "neumann", 0.5, WELL)
    grid = make_grid(0.0, 5.0, 0.01, [1.0])
    assert count_negative(ch, grid) == 0
    strong = Channel(0, 0.0, PowerWeight(1.0, 2.0), "neumann", 40.0, WELL)
    assert count_negative(strong, grid) >= 1


def test_misaligned_grid_rejected():
    tree = make_geometric_tree(1.5, 2)
    ch = Channel(0, 0.0, TreeWeight(tree, 0), "neumann", 1.0, WELL)
    bad = make_grid(0.0, 10.0, 0.3)
    with pytest.raises(BadGridError):
        discretize_form(ch, bad)
    good = make_grid(0.0, 10.0, 0.3, ch.breakpoints(0.0, 10.0))
    assert 4.0 in good.nodes


def test_grid_construction():
    g = make_grid(0.0, 50.0, 0.1, [1.0, 2.5], core_end=5.0, growth=1.1, h_max=2.0)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 50.0
    assert 1.0 in g.nodes and 2.5 in g.nodes
    d = np.diff(g.nodes)
    assert d[g.nodes[:-1] < 5.0].max() <= 0.1 + 1e-12
    assert d.max() <= 2.0 * 1.3 + 1e-12
    r = g.refine()
    assert len(r.nodes) == 2 * len(g.nodes) - 1
    with pytest.raises(BadGridError):
        make_grid(1.0, 1.0, 0.1)


def test_transformed_and_weighted_forms_agree():
    from weaktree.birman_schwinger import b0_channel

    W = gaussian_well(-1.0, 1.0)
    a = solve_channel(b0_channel(W, 3.0, 1.5, "weighted"), Numerics(h=0.005)).lowest
    b = solve_channel(b0_channel(W, 3.0, 1.5, "transformed"), Numerics(h=0.005)).lowest
    assert a == pytest.approx(b, rel=1e-4)
