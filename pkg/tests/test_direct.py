import numpy as np
import pytest
from scipy.io import mmread

from weaktree.direct import (
    build_graph_matrix,
    direct_count,
    direct_negative_spectrum,
    dump_coo,
    kirchhoff_residual,
)
from weaktree.errors import SizeCapError
from weaktree.halfline import Channel, PowerWeight, discretize_form, make_grid
from weaktree.potentials import gaussian_well, square_well
from weaktree.tree import RegularTree, make_half_line, make_terminal_tree


def test_half_line_matches_channel_pencil():
    V = square_well(-1.0, 0.0, 1.0)
    M = build_graph_matrix(make_half_line(), V, 3.0, 0, 0.05, 4.0)
    ch = Channel(0, 0.0, PowerWeight(), "neumann", 3.0, V)
    pen = discretize_form(ch, make_grid(0.0, 4.0, 0.05, [1.0]))
    np.testing.assert_allclose(M.A.toarray(), np.diag(pen.diag) + np.diag(pen.off, 1) + np.diag(pen.off, -1), atol=1e-12)
    np.testing.assert_allclose(M.mass, pen.mass, rtol=1e-14)


def test_star_vertex_row():
    tree = RegularTree((1.0,), (2,))
    h = 0.1
    M = build_graph_matrix(tree, square_well(0.0), 0.0, 1, h, 2.0)
    v = M.vertex_index[(1, 0)]
    row = M.stiffness.getrow(v).toarray().ravel()
    nbrs = np.flatnonzero(row)
    # the vertex couples to its own unknown plus one neighbor on each of three edges
    assert len(nbrs) == 4
    assert row[v] == pytest.approx(3 / h)
    assert sorted(row[nbrs[nbrs != v]]) == pytest.approx([-1 / h] * 3)
    assert row.sum() == pytest.approx(0.0, abs=1e-12)
    assert M.mass[v] == pytest.approx(1.5 * h)


def test_free_tree_nonnegative():
    tree = RegularTree((1.0, 2.0), (2, 3))
    M = build_graph_matrix(tree, square_well(0.0), 1.0, 2, 0.05, 3.0)
    assert direct_count(M) == 0
    B = M.A.toarray() / np.sqrt(np.outer(M.mass, M.mass))
    assert np.linalg.eigvalsh(B)[0] >= -1e-10
    assert direct_negative_spectrum(M, 5).eigenvalues == ()


def test_symmetric_star_degeneracy():
    tree = RegularTree((1.0,), (3,))
    M = build_graph_matrix(tree, square_well(-1.0, 0.0, 2.0), 30.0, 1, 0.02, 4.0)
    ev = np.asarray(direct_negative_spectrum(M, 20).eigenvalues)
    # channel-1 states appear with multiplicity b_1 - 1 = 2
    groups = []
    for v in ev:
        if groups and abs(v - groups[-1][0]) <= 1e-8 * abs(v):
            groups[-1].append(v)
        else:
            groups.append([v])
    assert {len(g) for g in groups} == {1, 2}


def test_count_matches_dense_inertia():
    tree = RegularTree((0.7, 1.5), (2, 2))
    M = build_graph_matrix(tree, gaussian_well(-1.0, 1.5), 12.0, 2, 0.05, 4.0)
    B = M.A.toarray() / np.sqrt(np.outer(M.mass, M.mass))
    ev = np.linalg.eigvalsh(B)
    for s in [-8.0, -3.0, -1.0, 0.0, 2.0]:
        assert direct_count(M, s) == int(np.sum(ev < s))


def test_dense_and_sparse_paths_agree():
    tree = RegularTree((1.0, 2.0), (2, 2))
    M = build_graph_matrix(tree, square_well(-1.0, 0.0, 3.0), 25.0, 2, 0.02, 5.0)
    dense = direct_negative_spectrum(M, 12)
    sparse = direct_negative_spectrum(M, 12, dense_limit=0)
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, rtol=1e-9)


def test_zero_coupling_empty():
    M = build_graph_matrix(RegularTree((1.0,), (2,)), square_well(-1.0), 0.0, 1, 0.05, 3.0)
    assert direct_negative_spectrum(M, 4).eigenvalues == ()


def test_kirchhoff_residual_small_and_shrinking():
    tree = RegularTree((1.0, 2.0), (2, 2))
    V = square_well(-1.0, 0.0, 3.0)
    res = []
    for h in (0.02, 0.01):
        M = build_graph_matrix(tree, V, 25.0, 2, h, 5.0)
        B = M.A.toarray() / np.sqrt(np.outer(M.mass, M.mass))
        w, v = np.linalg.eigh(B)
        u = v[:, 0] / np.sqrt(M.mass)
        u /= np.max(np.abs(u))
        res.append(kirchhoff_residual(M, u))
    assert res[1] < res[0]
    assert res[1] < 0.2
    M = build_graph_matrix(tree, V, 25.0, 2, 0.05, 5.0, leaf_boundary="neumann")
    assert kirchhoff_residual(M, np.ones(M.dimension)) == pytest.approx(0.0, abs=1e-12)


def test_size_cap():
    tree = RegularTree((1.0, 2.0), (4, 4))
    with pytest.raises(SizeCapError):
        build_graph_matrix(tree, square_well(-1.0), 1.0, 2, 0.001, 5.0, cap=1000)


def test_dump_coo(tmp_path):
    tree = make_terminal_tree((2,), (1.0,))
    M = build_graph_matrix(tree, square_well(-1.0, 0.0, 2.0), 5.0, 1, 0.1, 3.0)
    a_path, m_path = dump_coo(M, str(tmp_path / "star"))
    A = mmread(a_path).toarray()
    Mm = mmread(m_path).toarray()
    np.testing.assert_allclose(A, M.A.toarray(), rtol=1e-15)
    np.testing.assert_allclose(np.diag(Mm), M.mass, rtol=1e-15)


def test_cut_radius_validation():
    with pytest.raises(ValueError):
        build_graph_matrix(RegularTree((1.0, 2.0), (2, 2)), square_well(-1.0), 1.0, 2, 0.1, 1.5)
