"""Edge bookkeeping: canonical edges, explicit graphs, snapshots, reachability."""

import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from exwalk.lattice import (
    COORD_BOUND,
    CoordinateOverflowError,
    Edge,
    EdgeState,
    ExplicitFinite,
    FullLattice,
    LatticeError,
    RangeError,
    UnrevealedEdgeError,
    canonical_edge,
    direction_from_code,
    directions,
    explicit_from_states,
    in_box,
    load_edges,
    neighbor,
    reachable_sites,
    save_edges,
    snapshot_string,
)

sites2 = st.tuples(st.integers(-50, 50), st.integers(-50, 50))


def test_directions_follow_letter_code_order():
    for d in (1, 2, 3):
        ds = directions(d)
        assert len(ds) == 2 * d
        for code, dr in enumerate(ds):
            assert dr.code == code
            assert direction_from_code(code, d) == dr
            assert dr.opposite().opposite() == dr


def test_direction_code_out_of_range():
    with pytest.raises(RangeError):
        direction_from_code(4, 2)
    with pytest.raises(RangeError):
        direction_from_code(-1, 2)


@given(sites2, st.integers(0, 3))
def test_canonical_edge_is_direction_symmetric(site, code):
    """The edge crossed from either endpoint canonicalizes identically."""
    dr = direction_from_code(code, 2)
    other = neighbor(site, dr)
    assert canonical_edge(site, dr) == canonical_edge(other, dr.opposite())


@given(sites2, st.integers(0, 3))
def test_edge_high_is_neighbor_along_axis(site, code):
    e = canonical_edge(site, direction_from_code(code, 2))
    assert e.high[e.axis] == e.low[e.axis] + 1
    assert all(h == l for i, (h, l) in enumerate(zip(e.high, e.low)) if i != e.axis)


def test_neighbor_overflow_guard():
    dr = direction_from_code(0, 1)
    assert neighbor((COORD_BOUND - 2,), dr) == (COORD_BOUND - 1,)
    with pytest.raises(CoordinateOverflowError):
        neighbor((COORD_BOUND - 1,), dr)
    with pytest.raises(CoordinateOverflowError):
        neighbor((-(COORD_BOUND - 1),), dr.opposite())


def test_full_lattice_every_edge_present():
    full = FullLattice(2)
    assert full.edge_state(Edge((3, -4), 1)) is EdgeState.PRESENT
    assert full.edge_state(Edge((0, 0), 0)) is EdgeState.PRESENT
    with pytest.raises(RangeError):
        FullLattice(0)


def test_explicit_finite_states_and_degree():
    box = ((-1, 1), (-1, 1))
    e1 = Edge((0, 0), 0)
    e2 = Edge((0, 0), 1)
    g = ExplicitFinite(2, box, frozenset({e1, e2}))
    assert g.edge_state(e1) is EdgeState.PRESENT
    assert g.edge_state(Edge((-1, 0), 0)) is EdgeState.ABSENT
    assert g.degree((0, 0)) == 2
    assert g.degree((1, 0)) == 1
    assert g.degree((-1, -1)) == 0
    assert g.has_edge((1, 0), direction_from_code(1, 2))  # -x from (1,0)


def test_explicit_finite_box_length_validation():
    with pytest.raises(RangeError):
        ExplicitFinite(2, ((0, 0),), frozenset())


def test_sites_in_box_enumeration():
    g = ExplicitFinite(2, ((0, 1), (0, 2)), frozenset())
    sites = list(g.sites_in_box())
    assert len(sites) == 6
    assert sites == sorted(sites)


def test_in_box():
    box = ((-2, 2), (0, 3))
    assert in_box((0, 0), box)
    assert in_box((-2, 3), box)
    assert not in_box((-3, 0), box)
    assert not in_box((0, 4), box)


@given(st.integers(1, 3), st.integers(0, 3))
def test_reachable_sites_full_box_count(d, k):
    """A full lattice restricted to a radius-k box reaches (2k+1)^d sites."""
    box = tuple((-k, k) for _ in range(d))
    sites = reachable_sites(FullLattice(d), (0,) * d, box)
    assert len(sites) == (2 * k + 1) ** d
    assert list(sites) == sorted(sites)


def test_reachable_sites_respects_absent_edges():
    # two sites joined by one edge, third site disconnected
    box = ((0, 2), (0, 0))
    g = ExplicitFinite(2, box, frozenset({Edge((0, 0), 0)}))
    assert reachable_sites(g, (0, 0), box) == ((0, 0), (1, 0))
    assert reachable_sites(g, (2, 0), box) == ((2, 0),)


def test_reachable_sites_origin_outside_box():
    with pytest.raises(RangeError):
        reachable_sites(FullLattice(2), (5, 0), ((-1, 1), (-1, 1)))


def test_reachable_sites_raises_on_unrevealed():
    class Tri:
        d = 2

        def edge_state(self, edge):
            return EdgeState.UNREVEALED

    with pytest.raises(UnrevealedEdgeError):
        reachable_sites(Tri(), (0, 0), ((-1, 1), (-1, 1)))


states_small = st.dictionaries(
    st.builds(
        Edge,
        st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
        st.integers(0, 1),
    ),
    st.sampled_from([EdgeState.PRESENT, EdgeState.ABSENT]),
    max_size=12,
)


@given(states_small)
def test_snapshot_roundtrip(states):
    buf = io.StringIO()
    save_edges(buf, 2, states)
    buf.seek(0)
    d, back = load_edges(buf)
    assert d == 2
    assert back == states


@given(states_small)
def test_snapshot_string_is_sorted_and_stable(states):
    text = snapshot_string(2, states)
    assert text == snapshot_string(2, states)
    body = text.splitlines()[1:]
    assert body == sorted(body, key=lambda ln: [int(c) for c in ln.split()[:4]])


def test_snapshot_header():
    text = snapshot_string(1, {Edge((0,), 0): EdgeState.PRESENT})
    assert text.splitlines()[0] == "exwalk-edges v1 d=1"


def test_snapshot_rejects_unrevealed():
    with pytest.raises(UnrevealedEdgeError):
        snapshot_string(2, {Edge((0, 0), 0): EdgeState.UNREVEALED})


def test_load_edges_rejects_garbage():
    with pytest.raises(LatticeError):
        load_edges(io.StringIO("not-a-snapshot 9\n"))
    with pytest.raises(LatticeError):
        load_edges(io.StringIO("exwalk-edges v1 d=2\n0 0 5 5 present\n"))


def test_explicit_from_states_infers_box():
    states = {
        Edge((0, 0), 0): EdgeState.PRESENT,
        Edge((2, 1), 1): EdgeState.ABSENT,
    }
    g = explicit_from_states(2, states)
    assert g.edge_state(Edge((0, 0), 0)) is EdgeState.PRESENT
    assert g.edge_state(Edge((2, 1), 1)) is EdgeState.ABSENT
    # box covers both endpoints of every keyed edge
    assert in_box((1, 0), g.box) and in_box((2, 2), g.box)


def test_explicit_from_states_empty():
    g = explicit_from_states(2, {})
    assert g.box == ((0, 0), (0, 0))
    assert g.present == frozenset()
