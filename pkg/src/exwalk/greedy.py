"""Greedily revealed monotone north-east path and its unrolled line walk.

The environment starts as the single site at the origin.  Whenever the
walk sits at the north-east leaf and reads +x or +y, the path grows one
edge in that direction (the letter is accepted); the mirror rule applies
at the south-west leaf for -x and -y.  Everything else follows ordinary
induced-walk semantics on the path built so far: the step is accepted
exactly when its edge already belongs to the path.

Identifying the path with the integers (origin at offset 0, north-east
positive) turns the walk into a line walk that moves toward fresh ground
with probability 2/3 when standing on an endpoint of its attained range
and is symmetric inside.  boundary_law_simulate draws from that line law
directly and is the cross-implementation oracle for the construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import COORD_BOUND, CoordinateOverflowError, Edge, LatticeError, RangeError, Site
from .walk import WalkTranscript
from .words import StreamSeed, letter_codes, words_at

_BLOCK = 1 << 14

_T_TWO_THIRDS = round((2 / 3) * 2**64)
_T_HALF = 1 << 63


class PathMismatchError(LatticeError):
    """A transcript step crossed an edge that is not on the path."""


@dataclass(frozen=True)
class GreedyPath:
    """A finite monotone staircase through the origin, plus where the
    origin sits along it.

    edges runs from sw_leaf to ne_leaf; edges[origin_index] is the first
    edge north-east of the origin.
    """

    ne_leaf: Site
    sw_leaf: Site
    edges: tuple
    origin_index: int

    def __post_init__(self):
        if not 0 <= self.origin_index <= len(self.edges):
            raise RangeError("origin_index must lie on the path")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def axis_toward_ne(self, offset: int) -> int | None:
        """Axis of the path edge from signed offset to offset+1, if any."""
        idx = self.origin_index + offset
        if 0 <= idx < len(self.edges):
            return self.edges[idx].axis
        return None

    def site_at(self, offset: int) -> Site:
        idx = self.origin_index + offset
        if not 0 <= idx <= len(self.edges):
            raise RangeError(f"offset {offset} is off the path")
        x, y = self.sw_leaf
        for e in self.edges[:idx]:
            if e.axis == 0:
                x += 1
            else:
                y += 1
        return (x, y)


@dataclass(frozen=True)
class UnrolledTranscript:
    """Signed path offsets of the walk, one per letter-time, with the
    attained range [a, b]."""

    positions: np.ndarray
    a: int
    b: int

    @property
    def n_letters(self) -> int:
        return len(self.positions) - 1

    def final_offset(self) -> int:
        return int(self.positions[-1])


def _arms_to_path(ne_arm, sw_arm) -> GreedyPath:
    ne_x = sum(1 for c in ne_arm if c == 0)
    sw_x = sum(1 for c in sw_arm if c == 0)
    sw_leaf = (-sw_x, -(len(sw_arm) - sw_x))
    edges = []
    x, y = sw_leaf
    for c in reversed(sw_arm):
        edges.append(Edge((x, y), c))
        if c == 0:
            x += 1
        else:
            y += 1
    assert (x, y) == (0, 0)
    for c in ne_arm:
        edges.append(Edge((x, y), c))
        if c == 0:
            x += 1
        else:
            y += 1
    return GreedyPath(
        ne_leaf=(x, y),
        sw_leaf=sw_leaf,
        edges=tuple(edges),
        origin_index=len(sw_arm),
    )


def run_greedy_path(seed: StreamSeed, horizon_letters: int):
    """Grow the path by walking on it; returns (GreedyPath, WalkTranscript).

    Letter codes: 0 = +x, 1 = -x, 2 = +y, 3 = -y.  At time 0 the origin
    is both leaves, so every letter is accepted and starts an arm.
    """
    if horizon_letters < 0:
        raise RangeError("horizon_letters must be >= 0")
    key = seed.key
    ne_arm = bytearray()  # axis codes, origin outward
    sw_arm = bytearray()
    i = 0  # signed offset along the path
    accepted = bytearray()
    t = 0
    while t < horizon_letters:
        block = letter_codes(key, t, min(_BLOCK, horizon_letters - t))
        for L in block:
            axis = L >> 1
            if L & 1 == 0:
                # letter goes north-east (+x or +y)
                if i >= 0:
                    if i == len(ne_arm):
                        if i >= COORD_BOUND:
                            raise CoordinateOverflowError("path grew too long")
                        ne_arm.append(axis)
                        i += 1
                        accepted.append(1)
                    elif ne_arm[i] == axis:
                        i += 1
                        accepted.append(1)
                    else:
                        accepted.append(0)
                else:
                    if sw_arm[-i - 1] == axis:
                        i += 1
                        accepted.append(1)
                    else:
                        accepted.append(0)
            else:
                # letter goes south-west (-x or -y)
                if i <= 0:
                    if -i == len(sw_arm):
                        if -i >= COORD_BOUND:
                            raise CoordinateOverflowError("path grew too long")
                        sw_arm.append(axis)
                        i -= 1
                        accepted.append(1)
                    elif sw_arm[-i] == axis:
                        i -= 1
                        accepted.append(1)
                    else:
                        accepted.append(0)
                else:
                    if ne_arm[i - 1] == axis:
                        i -= 1
                        accepted.append(1)
                    else:
                        accepted.append(0)
        t += len(block)
    path = _arms_to_path(ne_arm, sw_arm)
    letters = np.frombuffer(letter_codes(key, 0, horizon_letters), dtype=np.uint8)
    acc = np.frombuffer(bytes(accepted), dtype=np.uint8).astype(bool)
    transcript = WalkTranscript(
        2, (0, 0), letters, acc, seed.master_seed, seed.stream_id
    )
    return path, transcript


def unroll(path: GreedyPath, transcript: WalkTranscript) -> UnrolledTranscript:
    """Map a transcript on the path to signed offsets from the origin.

    Raises PathMismatchError when an accepted step crosses an edge the
    path does not contain; that means the transcript belongs to some
    other environment.
    """
    letters = np.asarray(transcript.letters)
    accepted = np.asarray(transcript.accepted, dtype=bool)
    goes_ne = (letters & 1) == 0
    deltas = np.where(accepted, np.where(goes_ne, 1, -1), 0).astype(np.int64)
    positions = np.concatenate(([0], np.cumsum(deltas)))
    # validate every accepted step against the path's edge list; offsets
    # are only trusted up to the first mismatch, which is the one we report
    path_axes = np.fromiter(
        (e.axis for e in path.edges), dtype=np.int64, count=len(path.edges)
    )
    pre = positions[:-1]
    edge_idx = path.origin_index + np.where(goes_ne, pre, pre - 1)
    in_path = (edge_idx >= 0) & (edge_idx < len(path_axes))
    axis_ok = np.zeros(len(letters), dtype=bool)
    axis_ok[in_path] = path_axes[edge_idx[in_path]] == (letters[in_path] >> 1)
    bad = accepted & ~(in_path & axis_ok)
    if bad.any():
        t = int(np.argmax(bad))
        L = int(letters[t])
        name = ("+" if L & 1 == 0 else "-") + "xy"[L >> 1]
        raise PathMismatchError(
            f"accepted step at letter-time {t + 1} needs a {name} edge at "
            f"offset {int(pre[t])}, which the path does not contain"
        )
    return UnrolledTranscript(
        positions=positions,
        a=int(positions.min()),
        b=int(positions.max()),
    )


def boundary_law_stats(u: UnrolledTranscript) -> dict:
    """Accepted-step counts split by range-endpoint versus interior.

    The attained range is tracked as the walk goes, so "endpoint" means
    endpoint at that moment.  While the range is still the single start
    point the two-sided law is degenerate (any move is outward), so the
    one step taken from that state is counted in neither class.
    """
    pos = u.positions
    pre = pos[:-1]
    post = pos[1:]
    lo = np.minimum.accumulate(pos)[:-1]
    hi = np.maximum.accumulate(pos)[:-1]
    moved = post != pre
    proper = lo != hi
    at_hi = moved & proper & (pre == hi)
    at_lo = moved & proper & (pre == lo)
    up = post > pre
    boundary = at_hi | at_lo
    outward = (at_hi & up) | (at_lo & ~up)
    interior = moved & proper & ~boundary
    return {
        "boundary_visits": int(boundary.sum()),
        "outward_moves": int(outward.sum()),
        "inward_moves": int((boundary & ~outward).sum()),
        "interior_left": int((interior & ~up).sum()),
        "interior_right": int((interior & up).sum()),
    }


def returns_to_origin(u: UnrolledTranscript) -> int:
    """Accepted-step arrivals at offset 0 (the start instant not counted)."""
    pos = u.positions
    return int(((pos[1:] == 0) & (pos[1:] != pos[:-1])).sum())


def boundary_law_simulate(seed: StreamSeed, horizon_steps: int) -> UnrolledTranscript:
    """Draw the line law directly: every tick is an accepted step that
    moves outward with probability 2/3 from a range endpoint (1/2 from
    the starting point, where both ways are outward) and is symmetric
    strictly inside the range."""
    if horizon_steps < 0:
        raise RangeError("horizon_steps must be >= 0")
    key = seed.key
    positions = np.zeros(horizon_steps + 1, dtype=np.int64)
    i = 0
    a = b = 0
    t = 0
    while t < horizon_steps:
        n = min(_BLOCK, horizon_steps - t)
        words = words_at(key, np.arange(t, t + n, dtype=np.uint64))
        for w in words:
            w = int(w)
            if a < i < b:
                i += 1 if w < _T_HALF else -1
            elif b == a:
                i += 1 if w < _T_HALF else -1
            elif i == b:
                i += 1 if w < _T_TWO_THIRDS else -1
            else:
                i -= 1 if w < _T_TWO_THIRDS else -1
            if i > b:
                b = i
            elif i < a:
                a = i
            t += 1
            positions[t] = i
    return UnrolledTranscript(positions=positions, a=a, b=b)
