import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weaktree.errors import DegenerateRangeError, UnboundedRatioError
from weaktree.tree import (
    RegularTree,
    TreeWeight,
    dimension_estimate,
    envelope_constants,
    gk_eval,
    make_geometric_tree,
    make_half_line,
    make_terminal_tree,
    multiplicity,
    power_lower_constant,
)


@st.composite
def trees(draw):
    n = draw(st.integers(1, 6))
    gaps = draw(st.lists(st.floats(0.1, 3.0), min_size=n, max_size=n))
    t = np.cumsum(gaps)
    b = draw(st.lists(st.integers(1, 4), min_size=n, max_size=n))
    if max(b) < 2:
        b[0] = 2
    return RegularTree(tuple(t), tuple(b))


def test_g0_on_generation_interval():
    tree = RegularTree((1.0, 2.0, 3.0, 4.0), (2, 2, 2, 2))
    assert gk_eval(tree, 0, 2.5) == 4.0


def test_gk_vanishes_before_and_is_one_at_tk():
    tree = RegularTree((1.0, 2.0, 3.0, 4.0), (2, 3, 2, 2))
    assert gk_eval(tree, 3, 3.0) == 1.0
    assert gk_eval(tree, 3, 2.999) == 0.0
    assert gk_eval(tree, 3, 3.5) == 1.0
    assert gk_eval(tree, 3, 4.0) == 2.0


def test_gk_right_continuous():
    tree = RegularTree((1.0, 2.0), (3, 2))
    assert gk_eval(tree, 0, 1.0) == 3.0
    assert gk_eval(tree, 0, np.nextafter(1.0, 0.0)) == 1.0


def test_gk_rejects_negative_t():
    with pytest.raises(ValueError):
        gk_eval(make_half_line(), 0, -1.0)


@given(trees(), st.floats(0.0, 30.0))
def test_g0_factorizes_through_gk(tree, t):
    # g_0 = b_1...b_k g_k on [t_k, inf)
    for k in range(1, tree.generations + 1):
        if t >= tree.distance(k):
            assert gk_eval(tree, 0, t) == pytest.approx(tree.product(k) * gk_eval(tree, k, t))


@given(trees())
def test_g0_nondecreasing(tree):
    t = np.linspace(0.0, tree.distance(tree.generations) + 1.0, 400)
    g = gk_eval(tree, 0, t)
    assert np.all(np.diff(g) >= 0)


@given(trees())
def test_multiplicities_count_branches(tree):
    # channel 0 plus all channels up to n account for every branch beyond t_n
    n = tree.generations
    total = 1 + sum(multiplicity(tree, k) for k in range(1, n + 1))
    assert total == tree.product(n)


def test_multiplicity_examples():
    tree = RegularTree((1.0, 2.0, 3.0), (3, 2, 2))
    assert multiplicity(tree, 1) == 2
    assert multiplicity(tree, 2) == 3
    terminal = make_terminal_tree((2, 1, 1), (1.0, 2.0, 3.0))
    assert multiplicity(terminal, 2) == 0


def test_geometric_constructions():
    t15 = make_geometric_tree(1.5, 2)
    assert t15.vertex_distances[:3] == pytest.approx((4.0, 16.0, 64.0))
    t2 = make_geometric_tree(2.0, 2)
    for k in range(1, 10):
        tk = t2.distance(k)
        assert tk == pytest.approx(2.0**k)
        assert gk_eval(t2, 0, tk) / tk == pytest.approx(1.0)
    assert make_geometric_tree(3.0, 4).geometric_ratio == pytest.approx(2.0)
    with pytest.raises(ValueError):
        make_geometric_tree(1.0, 2)


def test_geometric_tree_continues_past_stored_generations():
    tree = make_geometric_tree(1.5, 2, generations=4)
    assert tree.distance(6) == pytest.approx(4.0**6)
    assert gk_eval(tree, 0, 4.0**6 * 1.01) == pytest.approx(2.0**6)
    assert multiplicity(tree, 6) == 32


@pytest.mark.parametrize("d", [1.5, 2.0, 2.5])
def test_dimension_estimate_geometric(d):
    tree = make_geometric_tree(d, 2)
    beta = tree.geometric_ratio
    assert dimension_estimate(tree, beta, beta**6) == pytest.approx(d, abs=1e-2)


def test_dimension_estimate_window_example():
    assert dimension_estimate(make_geometric_tree(1.5, 2), 4.0, 4096.0) == pytest.approx(1.5, abs=0.01)


def test_dimension_estimate_terminal_tree():
    tree = RegularTree((1.0, 2.0, 3.0, 4.0, 5.0, 6.0), (2, 1, 1, 1, 1, 1))
    assert dimension_estimate(tree, 2.0, 6.0) == pytest.approx(1.0, abs=0.05)


def test_dimension_estimate_degenerate():
    with pytest.raises(DegenerateRangeError):
        dimension_estimate(make_geometric_tree(1.5, 2), 4.0, 64.0)


def test_envelope_half_line():
    env = envelope_constants(make_half_line(), 0, 1.0)
    assert env.lower == env.upper == 1.0


@pytest.mark.parametrize("d,b", [(1.5, 2), (2.0, 2), (1.5, 3), (2.5, 2)])
def test_envelope_geometric_bracket(d, b):
    tree = make_geometric_tree(d, b)
    env = envelope_constants(tree, 0, d)
    t1 = tree.distance(1)
    assert env.lower <= 1.0 <= env.upper
    assert env.upper / env.lower <= b * ((1 + t1) / t1) ** (d - 1) * (1 + 1e-12)
    # exhaustive check on a fine grid, including just before each vertex
    t = np.concatenate([np.linspace(0, 5000, 20001), np.asarray(tree.vertices_between(0, 1e6)) * (1 - 1e-12)])
    ratio = gk_eval(tree, 0, t) / (1 + t) ** (d - 1)
    assert np.all(ratio >= env.lower * (1 - 1e-12))
    assert np.all(ratio <= env.upper * (1 + 1e-12))


def test_envelope_channel_one():
    tree = make_geometric_tree(1.5, 2)
    env = envelope_constants(tree, 1, 1.5)
    t = np.linspace(tree.distance(1), 2000.0, 50001)
    ratio = gk_eval(tree, 1, t) / np.sqrt(1 + t)
    assert env.lower <= ratio.min() + 1e-12
    assert env.upper >= ratio.max() - 1e-12


def test_envelope_frozen_values():
    env = envelope_constants(make_geometric_tree(1.5, 2), 0, 1.5)
    assert env.lower == pytest.approx(1 / math.sqrt(5), rel=1e-14)
    assert env.upper == 1.0


def test_envelope_wrong_dimension():
    with pytest.raises(UnboundedRatioError):
        envelope_constants(RegularTree(tuple(2.0**k for k in range(1, 30)), (2,) * 29), 0, 1.2, L_check=64.0)


def test_power_lower_constant():
    assert power_lower_constant(make_half_line(), 1.0) == 1.0
    a = power_lower_constant(make_geometric_tree(1.5, 2), 1.5)
    assert a == pytest.approx(0.5)
    tree = make_geometric_tree(1.5, 2)
    t = np.linspace(1e-6, 5000, 100001)
    assert np.all(a * t**0.5 <= gk_eval(tree, 0, t) * (1 + 1e-12))


def test_inverse_weight_tail():
    tree = make_terminal_tree((2,), (1.0,))
    assert math.isinf(tree.inverse_weight_tail(0, 0.0))
    # beta = 4 < b^2? g_0 grows like t^(d-1) with d = 3: 1/g integrable
    t3 = make_geometric_tree(3.0, 4)
    s = 5.0
    ref = 0.0
    grid = np.concatenate([[s], t3.vertices_between(s, 1e12)])
    for a, b in zip(grid[:-1], grid[1:]):
        ref += (b - a) / gk_eval(t3, 0, a)
    assert t3.inverse_weight_tail(0, s) == pytest.approx(ref, rel=1e-6)


def test_tree_weight_wrapper():
    tree = make_geometric_tree(1.5, 2)
    w = TreeWeight(tree, 1)
    assert w(10.0) == 1.0 and w(3.0) == 0.0
    assert w.breakpoints(0.0, 70.0) == pytest.approx([4.0, 16.0, 64.0])


@pytest.mark.parametrize(
    "t,b",
    [((0.0, 1.0), (2, 2)), ((2.0, 1.0), (2, 2)), ((1.0,), (0,)), ((1.0, 2.0), (1, 1)), ((1.0,), (2, 2))],
)
def test_invalid_trees(t, b):
    with pytest.raises(ValueError):
        RegularTree(t, b)
