"""Lattice primitives: sites, directions, tri-state edges, and edge oracles.

Sites are plain tuples of ints (length d).  Edges are canonicalized as
(low endpoint, axis), where the low endpoint is the one with the smaller
coordinate on that axis.  Edge state is tri-state: an edge can be Present,
Absent, or not yet revealed (adaptive environments resolve Unrevealed
edges lazily; fixed graphs never report Unrevealed).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Protocol

Site = tuple  # tuple[int, ...] of length d

#: Coordinates must stay strictly below this magnitude so that integer
#: arithmetic in hot loops can never approach host word width.
COORD_BOUND = 1 << 62


class LatticeError(Exception):
    """Base class for lattice-layer failures."""


class CoordinateOverflowError(LatticeError):
    """A site coordinate reached the +/- 2^62 guard."""


class UnrevealedEdgeError(LatticeError):
    """An operation that requires finalized edges met an Unrevealed one."""


class RangeError(LatticeError):
    """A parameter is outside its supported range."""


class EdgeState(Enum):
    PRESENT = "present"
    ABSENT = "absent"
    UNREVEALED = "unrevealed"


class Direction(NamedTuple):
    """One of the 2d letters: a lattice axis plus a sign."""

    axis: int
    sign: int

    @property
    def code(self) -> int:
        """Letter code in [0, 2d): 2*axis for +, 2*axis+1 for -."""
        return 2 * self.axis + (0 if self.sign > 0 else 1)

    def opposite(self) -> "Direction":
        return Direction(self.axis, -self.sign)


def directions(d: int) -> tuple:
    """The 2d directions in letter-code order (+0, -0, +1, -1, ...)."""
    if d < 1:
        raise RangeError(f"dimension must be >= 1, got {d}")
    out = []
    for axis in range(d):
        out.append(Direction(axis, 1))
        out.append(Direction(axis, -1))
    return tuple(out)


def direction_from_code(code: int, d: int) -> Direction:
    if not 0 <= code < 2 * d:
        raise RangeError(f"letter code {code} out of range for d={d}")
    return Direction(code >> 1, 1 if code % 2 == 0 else -1)


class Edge(NamedTuple):
    """Canonical undirected edge: low endpoint plus the axis it spans."""

    low: Site
    axis: int

    @property
    def high(self) -> Site:
        hi = list(self.low)
        hi[self.axis] += 1
        return tuple(hi)


def neighbor(site: Site, direction: Direction) -> Site:
    """The adjacent site in `direction`, guarding coordinate overflow."""
    c = site[direction.axis] + direction.sign
    if not -COORD_BOUND < c < COORD_BOUND:
        raise CoordinateOverflowError(
            f"coordinate {c} on axis {direction.axis} exceeds the 2^62 guard"
        )
    out = list(site)
    out[direction.axis] = c
    return tuple(out)


def canonical_edge(site: Site, direction: Direction) -> Edge:
    """The undirected edge leaving `site` in `direction`, canonicalized."""
    if direction.sign > 0:
        return Edge(site, direction.axis)
    return Edge(neighbor(site, direction), direction.axis)


class EdgeOracle(Protocol):
    """Answers edge-state queries for a d-dimensional lattice subgraph."""

    d: int

    def edge_state(self, edge: Edge) -> EdgeState:  # pragma: no cover
        ...


class FullLattice:
    """Every edge of Z^d is Present."""

    def __init__(self, d: int = 2):
        if d < 1:
            raise RangeError(f"dimension must be >= 1, got {d}")
        self.d = d

    def edge_state(self, edge: Edge) -> EdgeState:
        return EdgeState.PRESENT

    def __repr__(self) -> str:
        return f"FullLattice(d={self.d})"


@dataclass(frozen=True)
class ExplicitFinite:
    """A finite edge set; everything not listed is Absent.

    `box` is one (lo, hi) inclusive pair per axis.  It bounds enumeration
    (snapshots, reachability); state queries outside the box answer Absent.
    Instances are immutable and hashable, so distance tables and the like
    can be cached per graph.
    """

    d: int
    box: tuple
    present: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.box) != self.d:
            raise RangeError(f"box must have {self.d} (lo, hi) pairs")
        object.__setattr__(self, "present", frozenset(self.present))

    def edge_state(self, edge: Edge) -> EdgeState:
        return EdgeState.PRESENT if edge in self.present else EdgeState.ABSENT

    def has_edge(self, site: Site, direction: Direction) -> bool:
        return canonical_edge(site, direction) in self.present

    def degree(self, site: Site) -> int:
        return sum(
            1
            for dn in directions(self.d)
            if canonical_edge(site, dn) in self.present
        )

    def sites_in_box(self) -> Iterable[Site]:
        def rec(prefix, axis):
            if axis == self.d:
                yield tuple(prefix)
                return
            lo, hi = self.box[axis]
            for c in range(lo, hi + 1):
                yield from rec(prefix + [c], axis + 1)

        yield from rec([], 0)


def in_box(site: Site, box: tuple) -> bool:
    return all(lo <= c <= hi for c, (lo, hi) in zip(site, box))


def reachable_sites(oracle: EdgeOracle, origin: Site, box: tuple) -> tuple:
    """Sites connected to `origin` by Present edges inside `box`.

    Breadth-first, expanding directions in letter-code order; the result is
    sorted lexicographically, so it is deterministic for a fixed oracle.
    Raises UnrevealedEdgeError if the search touches an Unrevealed edge.
    """
    if not in_box(origin, box):
        raise RangeError(f"origin {origin} not inside box {box}")
    dirs = directions(oracle.d)
    seen = {origin}
    queue = [origin]
    head = 0
    while head < len(queue):
        site = queue[head]
        head += 1
        for dn in dirs:
            nb = neighbor(site, dn)
            if nb in seen or not in_box(nb, box):
                continue
            state = oracle.edge_state(canonical_edge(site, dn))
            if state is EdgeState.UNREVEALED:
                raise UnrevealedEdgeError(
                    f"edge {canonical_edge(site, dn)} is unrevealed"
                )
            if state is EdgeState.PRESENT:
                seen.add(nb)
                queue.append(nb)
    return tuple(sorted(seen))


SNAPSHOT_MAGIC = "exwalk-edges"
SNAPSHOT_VERSION = "v1"


def save_edges(fobj, d: int, states: dict) -> None:
    """Write an edge snapshot: header line, then one edge per line.

    Lines are `<low coords> <high coords> <present|absent>`, sorted by the
    numeric coordinate tuple so output is byte-identical across runs.
    Unrevealed edges may not appear in a snapshot.
    """
    close = False
    if isinstance(fobj, (str, bytes)):
        fobj = open(fobj, "w", newline="\n")
        close = True
    try:
        fobj.write(f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} d={d}\n")
        rows = []
        for edge, state in states.items():
            if state is EdgeState.UNREVEALED:
                raise UnrevealedEdgeError(
                    f"snapshot may not contain unrevealed edge {edge}"
                )
            rows.append((edge.low + edge.high, state.value))
        rows.sort()
        for coords, word in rows:
            fobj.write(" ".join(str(c) for c in coords) + f" {word}\n")
    finally:
        if close:
            fobj.close()


def load_edges(fobj) -> tuple:
    """Read a snapshot written by save_edges; returns (d, {Edge: EdgeState})."""
    close = False
    if isinstance(fobj, (str, bytes)):
        fobj = open(fobj, "r")
        close = True
    try:
        header = fobj.readline().split()
        if (
            len(header) != 3
            or header[0] != SNAPSHOT_MAGIC
            or header[1] != SNAPSHOT_VERSION
            or not header[2].startswith("d=")
        ):
            raise LatticeError(f"bad snapshot header: {header}")
        d = int(header[2][2:])
        states = {}
        for line in fobj:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2 * d + 1:
                raise LatticeError(f"bad snapshot line: {line!r}")
            low = tuple(int(c) for c in parts[:d])
            high = tuple(int(c) for c in parts[d : 2 * d])
            diffs = [i for i in range(d) if high[i] != low[i]]
            if len(diffs) != 1 or high[diffs[0]] - low[diffs[0]] != 1:
                raise LatticeError(f"not a unit edge: {line!r}")
            state = EdgeState(parts[2 * d])
            states[Edge(low, diffs[0])] = state
        return d, states
    finally:
        if close:
            fobj.close()


def explicit_from_states(d: int, states: dict, pad: int = 0) -> ExplicitFinite:
    """Build an ExplicitFinite whose box covers every listed edge."""
    if not states:
        box = tuple((0, 0) for _ in range(d))
        return ExplicitFinite(d, box)
    los = [min(e.low[a] for e in states) for a in range(d)]
    his = [max(e.high[a] for e in states) for a in range(d)]
    box = tuple((lo - pad, hi + pad) for lo, hi in zip(los, his))
    present = frozenset(e for e, s in states.items() if s is EdgeState.PRESENT)
    return ExplicitFinite(d, box, present)


def snapshot_string(d: int, states: dict) -> str:
    buf = io.StringIO()
    save_edges(buf, d, states)
    return buf.getvalue()
