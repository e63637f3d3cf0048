"""Counter-based letter streams.

Every random decision in this package flows from a (master_seed, stream_id)
pair through the splitmix64 output function, a published 64-bit mixer with
full avalanche.  A stream's i-th word is

    word(key, i) = mix64(key + (i + 1) * GOLDEN)   (mod 2^64)

which is exactly the splitmix64 sequence seeded at `key`, so any counter
position can be reached in O(1) -- the property that makes per-trial and
per-particle substreams cheap.  The key itself folds the two seed words
through the same mixer:

    key = mix64(mix64(master_seed + GOLDEN) ^ (stream_id * MULT))

Letters (direction codes in [0, 2d)) come from words by rejection: each
letter index owns SLOTS consecutive counters; the first word below
2^64 - (2^64 mod 2d) is reduced mod 2d.  Rejection removes modulo bias
exactly.  For d in {1, 2, 4} the range divides 2^64 and no word is ever
rejected; for other d the per-word rejection chance is below 2^-61, so
exhausting all SLOTS retries is unobservable (we raise if it happens).

Identical (master_seed, stream_id, counter) gives identical output on any
platform: everything is fixed-width integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Direction, RangeError, direction_from_code

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MULT = 0xC2B2AE3D27D4EB4F
#: Counters reserved per letter index for rejection retries.
SLOTS = 8

_U = np.uint64
_NP_GOLDEN = _U(GOLDEN)
_NP_C1 = _U(0xBF58476D1CE4E5B9)
_NP_C2 = _U(0x94D049BB133111EB)


def mix64(z: int) -> int:
    """splitmix64 output function (Steele, Lea, Flood 2014)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_key(master_seed: int, stream_id: int) -> int:
    """Mix a 128-bit (master_seed, stream_id) pair down to a stream key."""
    h = mix64((master_seed + GOLDEN) & MASK64)
    return mix64(h ^ ((stream_id * MULT) & MASK64))


def word_at(key: int, counter: int) -> int:
    """The counter-th 64-bit word of the stream with this key."""
    return mix64((key + ((counter + 1) * GOLDEN)) & MASK64)


def derive_keys(master_seed: int, stream_ids: np.ndarray) -> np.ndarray:
    """Vectorized derive_key over an array of stream ids."""
    old = np.seterr(over="ignore")
    try:
        h = _U(mix64((master_seed + GOLDEN) & MASK64))
        z = h ^ (stream_ids.astype(_U) * _U(MULT))
        z = (z ^ (z >> _U(30))) * _NP_C1
        z = (z ^ (z >> _U(27))) * _NP_C2
        return z ^ (z >> _U(31))
    finally:
        np.seterr(**old)


def words_at(key, counters: np.ndarray) -> np.ndarray:
    """Vectorized word_at; `key` may be a scalar or an array of keys."""
    old = np.seterr(over="ignore")
    try:
        z = (np.asarray(key, dtype=_U) + (counters.astype(_U) + _U(1)) * _NP_GOLDEN)
        z = (z ^ (z >> _U(30))) * _NP_C1
        z = (z ^ (z >> _U(27))) * _NP_C2
        return z ^ (z >> _U(31))
    finally:
        np.seterr(**old)


@dataclass(frozen=True)
class StreamSeed:
    """Addressable source of one independent stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v <= MASK64:
                raise RangeError(f"{name} must be an unsigned 64-bit int, got {v}")

    @property
    def key(self) -> int:
        return derive_key(self.master_seed, self.stream_id)

    def substream(self, offset: int) -> "StreamSeed":
        """Stream for trial/worker `offset` (stream_id arithmetic)."""
        return StreamSeed(self.master_seed, (self.stream_id + offset) & MASK64)


def _letter_rejection_limit(d: int) -> int:
    n = 2 * d
    return (1 << 64) - ((1 << 64) % n)


class LetterStream:
    """Scalar letter source over the 2d-letter alphabet.

    Bit-identical to the vectorized block path: letter i uses counter slots
    [SLOTS*i, SLOTS*(i+1)).  `emitted` counts letters handed out, so state
    is a single integer and jump-ahead is assignment.
    """

    __slots__ = ("seed", "d", "key", "emitted", "_limit", "_n")

    def __init__(self, seed: StreamSeed, d: int = 2):
        if d < 1:
            raise RangeError(f"dimension must be >= 1, got {d}")
        self.seed = seed
        self.d = d
        self.key = seed.key
        self.emitted = 0
        self._n = 2 * d
        self._limit = _letter_rejection_limit(d)

    def next_code(self) -> int:
        base = self.emitted * SLOTS
        self.emitted += 1
        for slot in range(SLOTS):
            w = word_at(self.key, base + slot)
            if w < self._limit:
                return w % self._n
        raise RuntimeError("letter rejection slots exhausted")  # pragma: no cover

    def next_letter(self) -> Direction:
        return direction_from_code(self.next_code(), self.d)

    def jump_to(self, letter_index: int) -> None:
        """O(1) reposition: the next letter emitted is letter_index."""
        if letter_index < 0:
            raise RangeError("letter_index must be >= 0")
        self.emitted = letter_index

    def codes_block(self, n: int) -> bytes:
        """The next n letter codes as bytes (vectorized, then consumed)."""
        if n <= 0:
            return b""
        start = self.emitted
        self.emitted += n
        return letter_codes(self.key, start, n, self.d)


def letter_codes(key: int, start: int, n: int, d: int = 2) -> bytes:
    """Letter codes start..start+n-1 of a stream, as a bytes object.

    Slot 0 of each letter index is computed vectorized; the (astronomically
    rare, impossible for d in {1,2,4}) rejected words fall back to the
    scalar slot walk.
    """
    if n <= 0:
        return b""
    idx = np.arange(start, start + n, dtype=_U)
    old = np.seterr(over="ignore")
    try:
        w = words_at(key, idx * _U(SLOTS))
        alphabet = 2 * d
        if (1 << 64) % alphabet == 0:
            return (w % _U(alphabet)).astype(np.uint8).tobytes()
        limit = _U(_letter_rejection_limit(d))
        codes = (w % _U(alphabet)).astype(np.uint8)
        bad = np.nonzero(w >= limit)[0]
        if bad.size:
            for i in bad:  # pragma: no cover - probability < 2^-61 per word
                base = (start + int(i)) * SLOTS
                for slot in range(1, SLOTS):
                    ww = word_at(key, base + slot)
                    if ww < int(limit):
                        codes[i] = ww % alphabet
                        break
                else:
                    raise RuntimeError("letter rejection slots exhausted")
        return codes.tobytes()
    finally:
        np.seterr(**old)


def uniform01(key: int, counter: int) -> float:
    """Uniform double in [0, 1) from the top 53 bits of a word."""
    return (word_at(key, counter) >> 11) * (1.0 / (1 << 53))


def bernoulli_threshold(p: float) -> int:
    """Threshold t such that (word < t) has probability round(p * 2^64)/2^64."""
    if not 0.0 <= p <= 1.0:
        raise RangeError(f"probability must be in [0, 1], got {p}")
    return min(int(round(p * float(1 << 64))), 1 << 64)
