"""Greedy monotone path growth and its unrolled line-walk view."""

import numpy as np
import pytest

from exwalk.greedy import (
    GreedyPath,
    PathMismatchError,
    UnrolledTranscript,
    boundary_law_simulate,
    boundary_law_stats,
    returns_to_origin,
    run_greedy_path,
    unroll,
)
from exwalk.lattice import Edge, RangeError
from exwalk.walk import WalkTranscript
from exwalk.words import StreamSeed


def test_empty_horizon():
    path, tr = run_greedy_path(StreamSeed(1, 0), 0)
    assert path.n_edges == 0
    assert path.ne_leaf == path.sw_leaf == (0, 0)
    assert path.site_at(0) == (0, 0)
    u = unroll(path, tr)
    assert u.positions.tolist() == [0]
    assert u.a == u.b == 0
    assert returns_to_origin(u) == 0
    stats = boundary_law_stats(u)
    assert all(v == 0 for v in stats.values())


def test_path_is_monotone_staircase():
    path, tr = run_greedy_path(StreamSeed(7, 1), 4000)
    assert path.n_edges > 0
    # walking sw -> ne, both coordinates never decrease
    sites = [path.site_at(off) for off in range(-(path.origin_index),
                                                path.n_edges - path.origin_index + 1)]
    for (x0, y0), (x1, y1) in zip(sites, sites[1:]):
        assert (x1 - x0, y1 - y0) in ((1, 0), (0, 1))
    assert sites[0] == path.sw_leaf
    assert sites[-1] == path.ne_leaf
    assert (0, 0) in sites


def test_axis_toward_ne_bounds():
    path, _ = run_greedy_path(StreamSeed(7, 1), 200)
    b = path.n_edges - path.origin_index
    a = -path.origin_index
    assert path.axis_toward_ne(b) is None  # past the ne leaf
    assert path.axis_toward_ne(a - 1) is None
    assert path.axis_toward_ne(0) in (0, 1)
    with pytest.raises(RangeError):
        path.site_at(b + 1)


def test_run_greedy_path_is_deterministic():
    p1, t1 = run_greedy_path(StreamSeed(3, 5), 1500)
    p2, t2 = run_greedy_path(StreamSeed(3, 5), 1500)
    assert p1 == p2
    assert np.array_equal(t1.accepted, t2.accepted)


def test_unroll_matches_lattice_positions():
    """Offsets map back to the exact 2d sites the transcript visits."""
    path, tr = run_greedy_path(StreamSeed(42, 0), 2500)
    u = unroll(path, tr)
    pos2d = tr.positions()
    assert u.n_letters == tr.n_letters
    assert path.n_edges == u.b - u.a  # path grew exactly over the attained range
    for t in range(0, u.n_letters + 1, 97):
        assert path.site_at(int(u.positions[t])) == tuple(pos2d[t])
    assert abs(np.diff(u.positions)).max() <= 1


def test_unroll_rejects_foreign_transcript():
    path = GreedyPath(
        ne_leaf=(1, 0), sw_leaf=(0, 0), edges=(Edge((0, 0), 0),), origin_index=0
    )
    foreign = WalkTranscript(2, (0, 0), [2], [True])  # accepted +y step
    with pytest.raises(PathMismatchError):
        unroll(path, foreign)


def test_boundary_law_stats_hand_example():
    u = UnrolledTranscript(positions=np.array([0, 1, 2, 1, 2]), a=0, b=2)
    assert boundary_law_stats(u) == {
        "boundary_visits": 2,
        "outward_moves": 1,
        "inward_moves": 1,
        "interior_left": 0,
        "interior_right": 1,
    }


def test_returns_to_origin_hand_example():
    u = UnrolledTranscript(positions=np.array([0, 1, 0, -1, 0]), a=-1, b=1)
    assert returns_to_origin(u) == 2


def test_boundary_stats_partition_moves():
    path, tr = run_greedy_path(StreamSeed(9, 0), 3000)
    u = unroll(path, tr)
    s = boundary_law_stats(u)
    moved = int((np.diff(u.positions) != 0).sum())
    classified = (
        s["outward_moves"] + s["inward_moves"]
        + s["interior_left"] + s["interior_right"]
    )
    # every accepted step is classified except the one from the degenerate range
    assert classified == moved - 1
    assert s["outward_moves"] + s["inward_moves"] == s["boundary_visits"]


def test_simulated_law_endpoint_frequencies():
    u = boundary_law_simulate(StreamSeed(19, 0), 30_000)
    assert u.n_letters == 30_000
    assert u.a == int(u.positions.min()) and u.b == int(u.positions.max())
    s = boundary_law_stats(u)
    out = s["outward_moves"] / s["boundary_visits"]
    assert 0.60 < out < 0.73, s
    inner = s["interior_left"] + s["interior_right"]
    assert 0.44 < s["interior_right"] / inner < 0.56, s


def test_construction_endpoint_frequencies():
    path, tr = run_greedy_path(StreamSeed(23, 0), 25_000)
    u = unroll(path, tr)
    s = boundary_law_stats(u)
    out = s["outward_moves"] / s["boundary_visits"]
    assert 0.58 < out < 0.75, s


def test_negative_horizons_rejected():
    with pytest.raises(RangeError):
        run_greedy_path(StreamSeed(1, 0), -1)
    with pytest.raises(RangeError):
        boundary_law_simulate(StreamSeed(1, 0), -1)
