"""The induced walk: read uniform letters, move only along Present edges.

A letter is one of the 2d directions.  The walk attempts the letter's step;
if the edge it would cross is Present the step is accepted, otherwise the
walk stands still for that letter.  Two clocks are kept: letters consumed
(wall time) and accepted steps (path time).

Transcripts store one byte per letter plus one acceptance flag; positions
are recomputed on demand by a vectorized prefix sum, so a million-letter
transcript costs a couple of megabytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    Direction,
    EdgeOracle,
    EdgeState,
    FullLattice,
    RangeError,
    Site,
    UnrevealedEdgeError,
    canonical_edge,
    direction_from_code,
    neighbor,
)
from .words import LetterStream

_AXIS_NAMES = "xyz"


def letter_name(code: int, d: int) -> str:
    axis, sign = code >> 1, "+" if code % 2 == 0 else "-"
    name = _AXIS_NAMES[axis] if axis < len(_AXIS_NAMES) else f"a{axis}"
    return sign + name


@dataclass(frozen=True)
class WalkState:
    """Instantaneous walk state: position plus both clocks."""

    pos: Site
    letters: int = 0
    steps: int = 0


class WalkTranscript:
    """Compact record of a walk: letters, acceptance flags, start site."""

    def __init__(
        self,
        d: int,
        start: Site,
        letters,
        accepted,
        master_seed: int | None = None,
        stream_id: int | None = None,
    ):
        self.d = d
        self.start = tuple(start)
        self.letters = np.asarray(letters, dtype=np.uint8)
        self.accepted = np.asarray(accepted, dtype=bool)
        if self.letters.shape != self.accepted.shape:
            raise RangeError("letters and accepted must have equal length")
        self.master_seed = master_seed
        self.stream_id = stream_id

    @property
    def n_letters(self) -> int:
        return int(self.letters.size)

    @property
    def n_steps(self) -> int:
        return int(self.accepted.sum())

    def deltas(self) -> np.ndarray:
        """(n, d) array of accepted unit moves (zero rows for rejections)."""
        n = self.letters.size
        out = np.zeros((n, self.d), dtype=np.int64)
        axis = self.letters >> 1
        sign = np.where(self.letters % 2 == 0, 1, -1).astype(np.int64)
        sign = np.where(self.accepted, sign, 0)
        out[np.arange(n), axis] = sign
        return out

    def positions(self) -> np.ndarray:
        """(n+1, d) positions, row t = position after t letters."""
        out = np.empty((self.letters.size + 1, self.d), dtype=np.int64)
        out[0] = self.start
        np.cumsum(self.deltas(), axis=0, out=out[1:])
        out[1:] += np.asarray(self.start, dtype=np.int64)
        return out

    def final_state(self) -> WalkState:
        pos = tuple(int(c) for c in self.positions()[-1])
        return WalkState(pos, self.n_letters, self.n_steps)

    def to_csv(self, fobj) -> None:
        """Dump `t,letter,accepted,<coords>` rows (t = 1-based letter count)."""
        close = False
        if isinstance(fobj, (str, bytes)):
            fobj = open(fobj, "w", newline="\n")
            close = True
        try:
            coords = ",".join(
                (_AXIS_NAMES[a] if a < len(_AXIS_NAMES) else f"a{a}")
                for a in range(self.d)
            )
            fobj.write(f"t,letter,accepted,{coords}\n")
            pos = self.positions()
            for t in range(self.letters.size):
                row = ",".join(str(int(c)) for c in pos[t + 1])
                fobj.write(
                    f"{t + 1},{letter_name(int(self.letters[t]), self.d)},"
                    f"{int(self.accepted[t])},{row}\n"
                )
        finally:
            if close:
                fobj.close()


def induced_step(
    state: WalkState, oracle: EdgeOracle, letter: Direction
) -> tuple:
    """Attempt one letter; returns (new state, accepted flag).

    Unrevealed edges are a caller error here: adaptive environments resolve
    edges through their own builders before this step function sees them.
    """
    edge = canonical_edge(state.pos, letter)
    es = oracle.edge_state(edge)
    if es is EdgeState.UNREVEALED:
        raise UnrevealedEdgeError(f"edge {edge} is unrevealed")
    if es is EdgeState.PRESENT:
        return (
            WalkState(neighbor(state.pos, letter), state.letters + 1, state.steps + 1),
            True,
        )
    return WalkState(state.pos, state.letters + 1, state.steps), False


def run_induced(
    stream: LetterStream,
    oracle: EdgeOracle,
    max_letters: int,
    start: Site | None = None,
) -> WalkTranscript:
    """Drive the induced walk for max_letters letters; returns a transcript."""
    d = stream.d
    if getattr(oracle, "d", d) != d:
        raise RangeError("stream dimension does not match oracle dimension")
    if start is None:
        start = (0,) * d
    if max_letters < 0:
        raise RangeError("max_letters must be >= 0")

    letters = np.frombuffer(stream.codes_block(max_letters), dtype=np.uint8)
    if isinstance(oracle, FullLattice):
        # Free walk: every letter is accepted.
        accepted = np.ones(max_letters, dtype=bool)
        return WalkTranscript(
            d, start, letters, accepted,
            stream.seed.master_seed, stream.seed.stream_id,
        )

    accepted = np.zeros(max_letters, dtype=bool)
    pos = list(start)
    dirs = [direction_from_code(c, d) for c in range(2 * d)]
    state = WalkState(tuple(pos))
    for t in range(max_letters):
        state, ok = induced_step(state, oracle, dirs[letters[t]])
        accepted[t] = ok
    return WalkTranscript(
        d, start, letters, accepted,
        stream.seed.master_seed, stream.seed.stream_id,
    )


def replay_letters(
    d: int,
    start: Site,
    letters,
    oracle: EdgeOracle,
) -> WalkTranscript:
    """Re-run a known letter sequence against an oracle (for audits)."""
    if isinstance(letters, (bytes, bytearray)):
        letters = np.frombuffer(bytes(letters), dtype=np.uint8)
    letters = np.asarray(letters, dtype=np.uint8)
    accepted = np.zeros(letters.size, dtype=bool)
    dirs = [direction_from_code(c, d) for c in range(2 * d)]
    state = WalkState(tuple(start))
    for t in range(letters.size):
        state, ok = induced_step(state, oracle, dirs[letters[t]])
        accepted[t] = ok
    return WalkTranscript(d, start, letters, accepted)
