import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmrfcg.grid import LatticeShape, NeighborhoodSpec, clique_count, neighbors, pair_cliques
from oracles import brute_pairs


def spec(dims, order):
    return NeighborhoodSpec(order, LatticeShape(dims))


def test_lattice_shape_validation():
    assert LatticeShape((3, 4)).size == 12
    assert LatticeShape((2, 3, 4)).spacing == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        LatticeShape((0, 3))
    with pytest.raises(ValueError):
        LatticeShape((3,))
    with pytest.raises(ValueError):
        LatticeShape((3, 3), (1.0, -1.0))


@pytest.mark.parametrize("order,site,expected", [
    (1, 4, [1, 3, 5, 7]),
    (2, 4, [0, 1, 2, 3, 5, 6, 7, 8]),
    (1, 0, [1, 3]),
])
def test_neighbors_3x3(order, site, expected):
    assert neighbors(spec((3, 3), order), site) == expected


def test_neighbors_out_of_range():
    with pytest.raises(IndexError):
        neighbors(spec((3, 3), 1), 9)


def test_order_two_reaches_two_steps_on_large_lattice():
    # the <= r^2 rule admits axis steps of length 2 as well as diagonals
    s = spec((5, 5), 2)
    assert len(neighbors(s, 12)) == 12


@pytest.mark.parametrize("dims,order,count", [
    ((2, 2), 2, 6),
    ((1, 1), 3, 0),
    ((3, 3), 1, 12),
])
def test_pair_counts(dims, order, count):
    pairs = list(pair_cliques(spec(dims, order)))
    assert len(pairs) == count == clique_count(spec(dims, order))


def test_3d_pairs_match_brute_force():
    s = spec((2, 2, 2), 2)
    pairs = {tuple(p) for p in pair_cliques(s)}
    assert pairs == brute_pairs((2, 2, 2), 2)
    assert len(pairs) == 28


dims_strategy = st.lists(st.integers(1, 5), min_size=2, max_size=3)


@settings(max_examples=40, deadline=None)
@given(dims=dims_strategy, order=st.integers(1, 3))
def test_symmetry_and_irreflexivity(dims, order):
    s = spec(tuple(dims), order)
    nb = {i: set(neighbors(s, i)) for i in range(s.shape.size)}
    for i, ns in nb.items():
        assert i not in ns
        for j in ns:
            assert i in nb[j]


@settings(max_examples=40, deadline=None)
@given(dims=dims_strategy, order=st.integers(1, 3))
def test_clique_count_identity(dims, order):
    s = spec(tuple(dims), order)
    pairs = list(pair_cliques(s))
    assert len(pairs) == len(set(pairs))
    assert all(p.s < p.t for p in pairs)
    degree_sum = sum(len(neighbors(s, i)) for i in range(s.shape.size))
    assert 2 * len(pairs) == degree_sum == 2 * clique_count(s)
    assert {tuple(p) for p in pairs} == brute_pairs(tuple(dims), order)
