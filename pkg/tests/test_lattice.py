import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavitynet import build_chain, build_custom, build_square
from cavitynet.errors import DisconnectedGraphError, InvalidEdgeError, InvalidSizeError

from oracles import torus_edges


def _pairs(lat):
    return {frozenset(b) for b in lat.bonds}


def test_six_chain():
    lat = build_chain(6)
    assert (lat.n_nodes, lat.n_bonds) == (6, 5)
    assert lat.bonds == tuple((i, i + 1) for i in range(5))
    assert lat.coords[3] == (3, 0)


def test_four_ring_closes():
    lat = build_chain(4, periodic=True)
    assert (lat.n_nodes, lat.n_bonds) == (4, 4)
    assert (3, 0) in lat.bonds
    assert lat.kind == "ring"


def test_two_cavity_system():
    lat = build_chain(2)
    assert (lat.n_nodes, lat.n_bonds) == (2, 1)


@pytest.mark.parametrize("n, periodic", [(1, False), (0, False), (2, True)])
def test_chain_size_errors(n, periodic):
    with pytest.raises(InvalidSizeError):
        build_chain(n, periodic)


def test_square_three_by_three():
    lat = build_square(3, 3)
    assert (lat.n_nodes, lat.n_bonds) == (9, 12)
    # row-major numbering and coordinates
    assert lat.coords[5] == (2, 1)
    assert lat.adjacent(4, 5) and lat.adjacent(4, 7) and not lat.adjacent(2, 3)


def test_square_smallest():
    lat = build_square(2, 2)
    assert (lat.n_nodes, lat.n_bonds) == (4, 4)


def test_torus_matches_enumeration():
    lat = build_square(3, 3, periodic=True)
    expected = torus_edges(3, 3)
    assert lat.n_bonds == len(expected) == 18
    got = {frozenset(lat.coords[k] for k in b) for b in lat.bonds}
    assert got == expected


@given(st.integers(3, 6), st.integers(3, 6))
def test_torus_enumeration_general(nx, ny):
    lat = build_square(nx, ny, periodic=True)
    got = {frozenset(lat.coords[k] for k in b) for b in lat.bonds}
    assert got == torus_edges(nx, ny)


@pytest.mark.parametrize("nx, ny, periodic", [(1, 1, False), (0, 3, False), (2, 3, True), (3, 2, True)])
def test_square_size_errors(nx, ny, periodic):
    with pytest.raises(InvalidSizeError):
        build_square(nx, ny, periodic)


@given(st.integers(1, 7), st.integers(1, 7))
def test_open_square_bond_count(nx, ny):
    if nx * ny < 2:
        return
    lat = build_square(nx, ny)
    assert lat.n_bonds == nx * (ny - 1) + ny * (nx - 1)


@given(st.integers(2, 40))
def test_open_chain_bond_count(n):
    assert build_chain(n).n_bonds == n - 1


def test_custom_equals_chain():
    a = build_custom(3, [(0, 1), (1, 2)])
    b = build_chain(3)
    assert a.bonds == b.bonds and a.coords == b.coords


def test_custom_disconnected():
    with pytest.raises(DisconnectedGraphError):
        build_custom(4, [(0, 1), (2, 3)])


@pytest.mark.parametrize("edges", [[(0, 1), (0, 1)], [(0, 1), (1, 0), (1, 2)], [(0, 0), (0, 1), (1, 2)]])
def test_custom_bad_edges(edges):
    with pytest.raises(InvalidEdgeError):
        build_custom(3, edges)


def test_custom_out_of_range():
    with pytest.raises(InvalidEdgeError):
        build_custom(3, [(0, 1), (1, 3)])


def test_custom_keeps_input_order():
    lat = build_custom(4, [(2, 3), (0, 1), (1, 2)])
    assert lat.bonds == ((2, 3), (0, 1), (1, 2))
    assert lat.bond_index(1, 0) == 1


@pytest.mark.parametrize("lat", [build_chain(6), build_chain(4, True), build_square(3, 3), build_square(4, 3, True)])
def test_neighbors_consistent_with_bonds(lat):
    for i in range(lat.n_nodes):
        listed = {j for a, b in lat.bonds for j in (a, b) if i in (a, b) and j != i}
        assert set(lat.neighbors(i)) == listed
        for b in lat.bonds_of(i):
            assert i in lat.bonds[b]


def test_incidence_and_path():
    lat = build_square(3, 3)
    k = lat.incidence()
    assert k.shape == (9, 12) and (k.sum(axis=0) == 2).all()
    assert lat.shortest_path(0, 8) is not None and len(lat.shortest_path(0, 8)) == 5
    assert lat.shortest_path(0, 2, blocked={1, 4}) == [0, 3, 6, 7, 8, 5, 2]
    assert lat.shortest_path(0, 2, blocked={1, 3}) is None
