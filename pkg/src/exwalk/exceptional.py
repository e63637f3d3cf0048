"""Staged adaptive corridor environment and its walk-driven construction.

The environment lives on Z^2.  Vertical edges are Present exactly on the
lines x = 2^n - 1 (n = 0, 1, 2, ...).  Horizontal edges left of x = 0 are
Absent.  The horizontal edges between consecutive lines are revealed in
stages by the walk itself: during stage n every rightward letter read at
x >= 2^n - 1 is accepted (revealing its edge Present if needed), and the
stage ends the moment the walk first reaches x = 2^(n+1) - 1.  At that
moment every still-unrevealed horizontal edge strictly between the two
lines is finalized Absent, so the gap keeps exactly one full connecting
row (where the stage ended) plus left-attached Present prefixes ("stubs")
on rows the walk explored.

Because rows can only be entered from the left line while a stage runs,
the Present horizontal edges of gap g along row y always form a prefix
[2^g - 1, reach].  The environment therefore stores one integer per
(gap, row): `reach[g][y]` = rightmost x reachable from the left line along
row y.  Rows not present in the map have no Present edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lattice import (
    Edge,
    EdgeState,
    LatticeError,
    RangeError,
    Site,
    UnrevealedEdgeError,
)
from .stats import EnEstimate, wilson_ci
from .walk import WalkTranscript
from .words import SLOTS, StreamSeed, letter_codes

MAX_STAGE = 40

_BLOCK = 1 << 14


def line_x(n: int) -> int:
    """x-coordinate of line n: 2^n - 1.  Guarded at n = 40."""
    if not 0 <= n <= MAX_STAGE:
        raise RangeError(f"stage index must be in [0, {MAX_STAGE}], got {n}")
    return (1 << n) - 1


class MissingTauError(LatticeError):
    """The transcript never reached the requested line."""


@dataclass(frozen=True)
class StageRecord:
    """One completed stage: letter-times it spans and its connecting row."""

    start_t: int
    end_t: int
    alpha: int


class ExcursionOutcome(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEITHER = "neither"


@dataclass(frozen=True)
class Excursion:
    """Maximal letter-time run at one y within a back-crossing window."""

    y: int
    start_t: int
    end_t: int
    x_min: int
    x_max: int
    outcome: ExcursionOutcome


class ExceptionalEnv:
    """Revealed/finalized edge state of the staged corridor construction."""

    d = 2

    def __init__(self):
        self.stage = 0
        self.reach = [dict()]  # per gap: {y: rightmost present-prefix x}
        self.alpha = []  # connecting row of each completed gap
        self.tau = [0]  # tau[n] = first letter-time at x = 2^n - 1
        self.stage_history = []
        self.audit = []  # (letter_time, y, new_reach_x) per revealed edge
        self.y_min = 0
        self.y_max = 0

    # -- static geometry -------------------------------------------------

    @staticmethod
    def is_line_x(x: int) -> bool:
        return x >= 0 and (x + 1) & x == 0

    @staticmethod
    def gap_of_low_x(x: int) -> int:
        """Gap index of a horizontal edge whose low endpoint has this x."""
        return (x + 1).bit_length() - 1

    # -- state queries ----------------------------------------------------

    def edge_state(self, edge: Edge) -> EdgeState:
        if edge.axis == 1:
            return (
                EdgeState.PRESENT
                if self.is_line_x(edge.low[0])
                else EdgeState.ABSENT
            )
        x, y = edge.low
        if x < 0:
            return EdgeState.ABSENT
        g = self.gap_of_low_x(x)
        if g < self.stage:
            limit = self.reach[g].get(y, line_x(g))
            return EdgeState.PRESENT if x + 1 <= limit else EdgeState.ABSENT
        if g == self.stage:
            limit = self.reach[g].get(y, line_x(g))
            return EdgeState.PRESENT if x + 1 <= limit else EdgeState.UNREVEALED
        return EdgeState.UNREVEALED

    def connecting_rows(self, g: int) -> list:
        """Rows of gap g whose Present prefix spans the whole gap."""
        full = line_x(g + 1)
        return sorted(y for y, r in self.reach[g].items() if r == full)

    def materialize(self, box: tuple) -> dict:
        """Edge -> state map inside `box`; Unrevealed edges are omitted."""
        (xlo, xhi), (ylo, yhi) = box
        out = {}
        for x in range(xlo, xhi + 1):
            for y in range(ylo, yhi + 1):
                if x + 1 <= xhi:
                    e = Edge((x, y), 0)
                    s = self.edge_state(e)
                    if s is not EdgeState.UNREVEALED:
                        out[e] = s
                if y + 1 <= yhi:
                    e = Edge((x, y), 1)
                    out[e] = self.edge_state(e)
        return out

    def default_box(self) -> tuple:
        return (
            (0, line_x(self.stage)),
            (self.y_min - 1, self.y_max + 1),
        )


class ExceptionalEngine:
    """Walk + environment co-evolution; one instance per run or trial.

    The letter loop is the package's hottest path, so it works on plain
    ints and per-gap dicts, pulling letters in vectorized blocks.  The
    public resolve_edge/induced_step pair expresses the same rules
    object-by-object; replay tests pin the two to each other.
    """

    def __init__(self, seed: StreamSeed, record: bool = True, audit: bool = True):
        self.seed = seed
        self.key = seed.key
        self.env = ExceptionalEnv()
        self.x = 0
        self.y = 0
        self.t = 0
        self.record = record
        self.audit = audit
        self.accepted = bytearray() if record else None
        self._block = b""
        self._base = 0  # letter index of block[0]

    def position(self) -> Site:
        return (self.x, self.y)

    def run(
        self,
        max_letters: int,
        target_stage: int | None = None,
        stop_x_low: int = -1,
    ) -> str:
        """Advance until a stop condition; returns which one fired.

        'stage'   -- env.stage reached target_stage
        'hit'     -- the walk's x reached stop_x_low (decision events)
        'letters' -- max_letters consumed
        """
        env = self.env
        x, y, t = self.x, self.y, self.t
        stage = env.stage
        if target_stage is not None and target_stage > MAX_STAGE:
            raise RangeError(
                f"stage index must be in [0, {MAX_STAGE}], got {target_stage}"
            )
        if target_stage is not None and stage >= target_stage:
            return "stage"
        line_l = line_x(stage)
        line_r = line_x(stage + 1)
        reach = env.reach
        rs = reach[stage]
        tau = env.tau
        alpha = env.alpha
        history = env.stage_history
        audit_log = env.audit if self.audit else None
        acc = self.accepted
        record = self.record
        y_lo, y_hi = env.y_min, env.y_max

        block = self._block
        base = self._base
        bi = t - base
        status = "letters"
        try:
            while t < max_letters:
                if bi >= len(block):
                    n = min(_BLOCK, max_letters - t)
                    block = letter_codes(self.key, t, n)
                    base = t
                    bi = 0
                letter = block[bi]
                bi += 1
                t += 1
                if letter >= 2:
                    # vertical: accepted only on a line
                    if (x + 1) & x == 0:
                        y = y + 1 if letter == 2 else y - 1
                        if record:
                            acc.append(1)
                        if y < y_lo:
                            y_lo = y
                        elif y > y_hi:
                            y_hi = y
                    elif record:
                        acc.append(0)
                elif letter == 0:
                    # +x
                    if x >= line_l:
                        cur = rs.get(y, line_l)
                        if x + 1 > cur:
                            rs[y] = x + 1
                            if audit_log is not None:
                                audit_log.append((t, y, x + 1))
                        x += 1
                        if record:
                            acc.append(1)
                        if x == line_r:
                            # stage ends; finalize and open the next gap
                            alpha.append(y)
                            history.append(StageRecord(tau[stage], t, y))
                            tau.append(t)
                            stage += 1
                            reach.append({})
                            rs = reach[stage]
                            if target_stage is not None and stage >= target_stage:
                                status = "stage"
                                break
                            if stage + 1 > MAX_STAGE:
                                raise RangeError(
                                    f"stage index must be in [0, {MAX_STAGE}],"
                                    f" got {stage + 1}"
                                )
                            line_l = line_r
                            line_r = line_x(stage + 1)
                    else:
                        g = (x + 1).bit_length() - 1
                        if x + 1 <= reach[g].get(y, (1 << g) - 1):
                            x += 1
                            if record:
                                acc.append(1)
                        elif record:
                            acc.append(0)
                else:
                    # -x
                    if x == 0:
                        if record:
                            acc.append(0)
                    elif x > line_l:
                        x -= 1
                        if record:
                            acc.append(1)
                    else:
                        g = x.bit_length() - 1
                        if x <= reach[g].get(y, (1 << g) - 1):
                            x -= 1
                            if record:
                                acc.append(1)
                            if x == stop_x_low:
                                status = "hit"
                                break
                        elif record:
                            acc.append(0)
        finally:
            self.x, self.y, self.t = x, y, t
            env.stage = stage
            env.y_min, env.y_max = y_lo, y_hi
            self._block = block
            self._base = base
        return status

    def transcript(self) -> WalkTranscript:
        if not self.record:
            raise RangeError("engine was created with record=False")
        letters = np.frombuffer(letter_codes(self.key, 0, self.t), dtype=np.uint8)
        accepted = np.frombuffer(bytes(self.accepted), dtype=np.uint8).astype(bool)
        return WalkTranscript(
            2, (0, 0), letters, accepted,
            self.seed.master_seed, self.seed.stream_id,
        )


def resolve_edge(env: ExceptionalEnv, pos: Site, letter) -> EdgeState:
    """Resolve the edge the walk at `pos` would cross reading `letter`.

    Vertical edges follow the line rule and never mutate.  A rightward
    letter read at x >= line_x(stage) always resolves Present, revealing
    the edge if it was Unrevealed.  Every other horizontal query must hit
    an already-determined edge; finding an Unrevealed one means the
    builder's bookkeeping is broken, so we raise instead of defaulting.
    """
    if letter.axis == 1:
        return (
            EdgeState.PRESENT if env.is_line_x(pos[0]) else EdgeState.ABSENT
        )
    x, y = pos
    low_x = x if letter.sign > 0 else x - 1
    if low_x < 0:
        return EdgeState.ABSENT
    g = env.gap_of_low_x(low_x)
    line_l = line_x(env.stage)
    if letter.sign > 0 and x >= line_l:
        rs = env.reach[env.stage]
        cur = rs.get(y, line_l)
        if x + 1 > cur:
            rs[y] = x + 1
        return EdgeState.PRESENT
    if g >= len(env.reach):
        raise UnrevealedEdgeError(
            f"horizontal edge at x={low_x}, y={y} queried beyond the active gap"
        )
    limit = env.reach[g].get(y, line_x(g))
    state = EdgeState.PRESENT if low_x + 1 <= limit else EdgeState.ABSENT
    if state is EdgeState.ABSENT and g >= env.stage:
        # inside the active gap nothing is finalized yet
        raise UnrevealedEdgeError(
            f"-x letter at {pos} queried an unrevealed edge (builder bug)"
        )
    return state


@dataclass(frozen=True)
class StopRule:
    """Stop condition for run_exceptional: stage count and/or letter cap."""

    max_stage: int | None = None
    max_letters: int | None = None

    def __post_init__(self):
        if self.max_stage is None and self.max_letters is None:
            raise RangeError("stop rule needs max_stage or max_letters")
        if self.max_stage is not None and not 0 <= self.max_stage <= MAX_STAGE:
            raise RangeError(f"max_stage must be in [0, {MAX_STAGE}]")
        if self.max_letters is not None and self.max_letters < 0:
            raise RangeError("max_letters must be >= 0")


#: Fallback letter cap when only max_stage is given.  Stage n completes in
#: about 40 * 4^n letters on average; this is dozens of times beyond the
#: mean for every allowed stage and exists only to bound the loop.
_STAGE_LETTER_CAP = 1 << 34


def run_exceptional(
    seed: StreamSeed, stop: StopRule, record: bool = True, audit: bool = True
):
    """Build the corridor environment by running its walk; returns
    (WalkTranscript, ExceptionalEnv).

    The transcript covers every letter consumed.  tau, alpha, and the
    stage history live on the environment.
    """
    engine = ExceptionalEngine(seed, record=record, audit=audit)
    cap = stop.max_letters if stop.max_letters is not None else _STAGE_LETTER_CAP
    engine.run(cap, target_stage=stop.max_stage)
    transcript = engine.transcript() if record else None
    return transcript, engine.env


def _window_En(transcript: WalkTranscript, env: ExceptionalEnv, n: int):
    """(t0, T, decided) of the back-crossing window after tau_n.

    T is the first letter-time after t0 at which x equals line_x(n-1) or
    line_x(n+1); if the transcript ends first, T is the last letter-time
    and decided is None.
    """
    if n < 1:
        raise RangeError(f"window index must be >= 1, got {n}")
    if n >= len(env.tau):
        raise MissingTauError(f"the walk never reached line {n}")
    t0 = env.tau[n]
    xs = transcript.positions()[:, 0]
    lo, hi = line_x(n - 1), line_x(n + 1)
    tail = xs[t0 + 1 :]
    idx = np.nonzero((tail == lo) | (tail == hi))[0]
    if idx.size == 0:
        return t0, xs.size - 1, None
    T = t0 + 1 + int(idx[0])
    return t0, T, ExcursionOutcome.POSITIVE if xs[T] == hi else ExcursionOutcome.NEGATIVE


def excursion_decompose(
    transcript: WalkTranscript, env: ExceptionalEnv, n: int
) -> list:
    """Split the window after tau_n into maximal fixed-y excursions.

    The last excursion carries the window's outcome (positive if the walk
    reached line n+1 first, negative for line n-1, neither if the
    transcript ran out); all earlier excursions end by a vertical step and
    are Neither.
    """
    t0, T, decided = _window_En(transcript, env, n)
    pos = transcript.positions()
    xs, ys = pos[t0 : T + 1, 0], pos[t0 : T + 1, 1]
    breaks = np.nonzero(np.diff(ys) != 0)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [ys.size - 1]))
    out = []
    for j, (s, e) in enumerate(zip(starts, ends)):
        seg = xs[s : e + 1]
        last = j == len(starts) - 1
        out.append(
            Excursion(
                y=int(ys[s]),
                start_t=t0 + int(s),
                end_t=t0 + int(e),
                x_min=int(seg.min()),
                x_max=int(seg.max()),
                outcome=(decided if last and decided is not None
                         else ExcursionOutcome.NEITHER),
            )
        )
    return out


def boundary_event_counts(
    transcript: WalkTranscript, env: ExceptionalEnv, n: int
) -> dict:
    """Accepted-step law at the left line of the stage-n window.

    Counts accepted steps departing from x = line_x(n) inside the window
    after tau_n, split by whether the step is vertical (the excursion
    ends) and by whether the row is the previous gap's connecting row.
    """
    t0, T, _ = _window_En(transcript, env, n)
    pos = transcript.positions()
    alpha = env.alpha[n - 1]
    lx = line_x(n)
    pre = pos[t0:T]
    post = pos[t0 + 1 : T + 1]
    moved = (pre != post).any(axis=1)
    at_line = pre[:, 0] == lx
    sel = moved & at_line
    vertical = pre[sel, 1] != post[sel, 1]
    at_alpha = pre[sel, 1] == alpha
    return {
        "ends_alpha": int((vertical & at_alpha).sum()),
        "moves_alpha": int((~vertical & at_alpha).sum()),
        "ends_other": int((vertical & ~at_alpha).sum()),
        "moves_other": int((~vertical & ~at_alpha).sum()),
    }


def interior_step_counts(
    transcript: WalkTranscript, env: ExceptionalEnv, n: int
) -> dict:
    """Left/right counts of accepted horizontal steps from interior sites.

    Interior means strictly between lines; sites at the tip of a finalized
    stub are excluded (there the left edge is the only Present one, so the
    one-half law cannot apply).
    """
    t0, T, _ = _window_En(transcript, env, n)
    pos = transcript.positions()
    left = 0
    right = 0
    for t in range(t0, T):
        x0, y0 = int(pos[t, 0]), int(pos[t, 1])
        x1 = int(pos[t + 1, 0])
        if x1 == x0 or int(pos[t + 1, 1]) != y0:
            continue
        if ExceptionalEnv.is_line_x(x0):
            continue
        g = ExceptionalEnv.gap_of_low_x(x0)
        if g < n and x0 == env.reach[g].get(y0, line_x(g)):
            continue
        if x1 > x0:
            right += 1
        else:
            left += 1
    return {"left": left, "right": right}


def line_visit_profile(
    transcript: WalkTranscript, env: ExceptionalEnv, k: int
) -> int:
    """How many letter-times t >= 1 have the walk sitting on line k.

    The start instant is not counted, so the sum over all k is at most the
    number of letters consumed.
    """
    lx = line_x(k)
    xs = transcript.positions()[1:, 0]
    return int((xs == lx).sum())


#: Measured tail constants of the trial-length law P(T > t) ~ C_n / sqrt(t).
#: Trial lengths have no finite mean: while traveling to line n the walk
#: can land on a line far (in y) from the one row connecting it onward, and
#: only a null-recurrent y-walk brings it back.  Censoring a trial at
#: horizon h therefore happens with chance ~ C_n / sqrt(h), and almost
#: always before the decision window opens, so dropping censored trials
#: leaves the estimate unbiased.
_EN_TAIL_C = {1: 0.9, 2: 1.7, 3: 5.7, 4: 15.0, 5: 37.0, 6: 93.0}


def default_en_horizon(n: int) -> int:
    """Letter horizon for one back-crossing trial at index n.

    Sized as (200 * C_n)^2 from the measured tail constants above, which
    keeps the censored fraction near 0.5% or less through n = 6.  The mean
    letters actually consumed per trial grow like 2 * C_n * sqrt(horizon),
    so tighter explicit horizons are much cheaper and still unbiased; the
    default favors few censored trials over speed.  Beyond the measured
    range the constant is extrapolated at the observed ~2.5x per stage.
    """
    if n <= 0:
        return 100_000
    c = _EN_TAIL_C.get(n)
    if c is None:
        c = _EN_TAIL_C[6] * 2.5 ** (n - 6)
    return max(100_000, int(200 * c) ** 2)


def _en_trial(base_seed: StreamSeed, n: int, t: int, horizon: int) -> str:
    engine = ExceptionalEngine(base_seed.substream(t), record=False, audit=False)
    status = engine.run(horizon, target_stage=n)
    if status != "stage":
        return "censored"
    status = engine.run(horizon, target_stage=n + 1, stop_x_low=line_x(n - 1))
    if status == "hit":
        return "hit"
    if status == "stage":
        return "completion"
    return "censored"


def _en_chunk(args) -> tuple:
    master, stream, n, lo, hi, horizon = args
    base = StreamSeed(master, stream)
    hits = completions = censored = 0
    for t in range(lo, hi):
        r = _en_trial(base, n, t, horizon)
        if r == "hit":
            hits += 1
        elif r == "completion":
            completions += 1
        else:
            censored += 1
    return hits, completions, censored


def estimate_En(
    n: int,
    trials: int,
    base_seed: StreamSeed,
    horizon_letters: int | None = None,
    jobs: int = 1,
) -> EnEstimate:
    """Monte Carlo estimate of the back-crossing probability at index n.

    Each trial builds a fresh environment from substream t, runs to the
    first arrival at line n, then continues until the walk hits line n-1
    (hit) or line n+1 (completion); trials that exhaust the letter horizon
    first are censored and excluded from the estimate.
    """
    if n < 1:
        raise RangeError(f"back-crossing index must be >= 1, got {n}")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    line_x(n + 1)  # overflow guard up front
    if horizon_letters is None:
        horizon_letters = default_en_horizon(n)
    chunks = _split_range(trials, jobs)
    args = [
        (base_seed.master_seed, base_seed.stream_id, n, lo, hi, horizon_letters)
        for lo, hi in chunks
    ]
    results = _map_maybe_parallel(_en_chunk, args, jobs)
    hits = sum(r[0] for r in results)
    completions = sum(r[1] for r in results)
    censored = sum(r[2] for r in results)
    return EnEstimate.from_counts(
        n=n,
        trials=trials,
        hits=hits,
        completions=completions,
        censored=censored,
        seed=base_seed,
        horizon=horizon_letters,
    )


def _split_range(total: int, jobs: int) -> list:
    jobs = max(1, min(jobs, total))
    step = (total + jobs - 1) // jobs
    return [(lo, min(lo + step, total)) for lo in range(0, total, step)]


def _map_maybe_parallel(fn, args, jobs: int):
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    import concurrent.futures

    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, args))
