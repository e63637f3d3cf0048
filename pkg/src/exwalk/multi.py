"""Several independent walks defeated by one shared adaptive environment.

Phase i builds the gap between lines L_i and L_(i+1).  A freshly
introduced walk first crosses the already finalized region alone (no
revelation happens there; everything is determined).  Then every walk
active in the phase advances in round-robin lockstep, one letter each per
round in fixed walk order; rightward letters at or beyond L_i are always
accepted, revealing edges that all walks share.  A walk freezes the
moment it reaches L_(i+1); the phase ends when every active walk is
frozen, and the gap's unrevealed edges become Absent.

With one walk the machinery degenerates to the single-walk staged
construction, letter for letter: that identity is the module's main
internal check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptional import MAX_STAGE, ExceptionalEnv, StageRecord, line_x
from .lattice import RangeError
from .stats import EnEstimate
from .walk import WalkState, WalkTranscript
from .words import StreamSeed, letter_codes

_BLOCK = 1 << 13

#: Trials of estimate_Eni are spaced this far apart in stream id space,
#: leaving room below each trial for one stream per walk.
TRIAL_STRIDE = 1 << 20

#: Fallback per-phase letter cap (per walk) when the caller gives none.
DEFAULT_PHASE_CAP = 1 << 33


@dataclass(frozen=True)
class PhaseStop:
    """Stop condition for run_multiwalk: phase count and/or total letters."""

    max_phase: int | None = None
    max_letters: int | None = None

    def __post_init__(self):
        if self.max_phase is None and self.max_letters is None:
            raise RangeError("stop rule needs max_phase or max_letters")
        if self.max_phase is not None and not 0 <= self.max_phase <= MAX_STAGE:
            raise RangeError(f"max_phase must be in [0, {MAX_STAGE}]")
        if self.max_letters is not None and self.max_letters < 0:
            raise RangeError("max_letters must be >= 0")


@dataclass(frozen=True)
class PhaseLogEntry:
    """One walk's participation in one phase, in its own letter clock.

    freeze_t is -1 when the run was cut off before the walk froze.
    """

    phase: int
    walk: int
    entry_t: int
    freeze_t: int


@dataclass
class MultiWalkRun:
    """Final state of a multi-walk construction run."""

    k: int
    env: ExceptionalEnv
    states: tuple
    phase: int
    phase_log: tuple
    truncated: bool
    base_seed: StreamSeed
    _accepted: tuple = field(default=(), repr=False)

    def transcript(self, walk: int) -> WalkTranscript:
        """Per-walk transcript (walks are numbered from 1)."""
        if not 1 <= walk <= self.k:
            raise RangeError(f"walk must be in [1, {self.k}]")
        if not self._accepted:
            raise RangeError("run was made with record=False")
        acc = self._accepted[walk - 1]
        n = len(acc)
        seed = self._walk_seed(walk)
        letters = np.frombuffer(letter_codes(seed.key, 0, n), dtype=np.uint8)
        accepted = np.frombuffer(bytes(acc), dtype=np.uint8).astype(bool)
        return WalkTranscript(
            2, (0, 0), letters, accepted, seed.master_seed, seed.stream_id
        )

    def _walk_seed(self, walk: int) -> StreamSeed:
        return self.base_seed.substream(walk - 1)


class _Walk:
    """Mutable per-walk state inside the engine."""

    __slots__ = ("key", "x", "y", "t", "frozen", "acc", "_block", "_base")

    def __init__(self, seed: StreamSeed, record: bool):
        self.key = seed.key
        self.x = 0
        self.y = 0
        self.t = 0
        self.frozen = False
        self.acc = bytearray() if record else None
        self._block = b""
        self._base = 0

    def next_letter(self) -> int:
        bi = self.t - self._base
        if bi >= len(self._block):
            self._block = letter_codes(self.key, self.t, _BLOCK)
            self._base = self.t
            bi = 0
        self.t += 1
        return self._block[bi]


class MultiWalkEngine:
    """Shared environment plus k walk states; drives phases to completion."""

    def __init__(
        self,
        base_seed: StreamSeed,
        k: int,
        record: bool = True,
        audit: bool = True,
    ):
        if k < 1:
            raise RangeError("k must be >= 1")
        self.base_seed = base_seed
        self.k = k
        self.record = record
        self.audit = audit
        self.env = ExceptionalEnv()
        self.walks = [
            _Walk(base_seed.substream(j), record) for j in range(k)
        ]
        self.phase = 0
        self.phase_log = []
        self.total_letters = 0
        self.truncated = False
        self.decisions = {}

    # -- induced-walk acceptance on the shared environment ---------------

    def _step_finalized(self, w: _Walk, letter: int) -> None:
        """One letter under plain induced semantics left of the active gap."""
        env = self.env
        x, y = w.x, w.y
        if letter >= 2:
            if (x + 1) & x == 0:
                w.y = y + 1 if letter == 2 else y - 1
                if w.acc is not None:
                    w.acc.append(1)
                if w.y < env.y_min:
                    env.y_min = w.y
                elif w.y > env.y_max:
                    env.y_max = w.y
            elif w.acc is not None:
                w.acc.append(0)
        elif letter == 0:
            g = (x + 1).bit_length() - 1
            if x + 1 <= env.reach[g].get(y, (1 << g) - 1):
                w.x = x + 1
                if w.acc is not None:
                    w.acc.append(1)
            elif w.acc is not None:
                w.acc.append(0)
        else:
            if x == 0:
                if w.acc is not None:
                    w.acc.append(0)
            else:
                g = x.bit_length() - 1
                if x <= env.reach[g].get(y, (1 << g) - 1):
                    w.x = x - 1
                    if w.acc is not None:
                        w.acc.append(1)
                elif w.acc is not None:
                    w.acc.append(0)

    def _solo_to_line(self, w: _Walk, target_x: int, letter_budget: int) -> bool:
        """Run a fresh walk alone across the finalized region to the line.

        Returns False if the budget ran out first.
        """
        spent = 0
        while w.x != target_x:
            if spent >= letter_budget:
                return False
            letter = w.next_letter()
            self.total_letters += 1
            spent += 1
            self._step_finalized(w, letter)
        return True

    # -- the lockstep phase loop ------------------------------------------

    def run(
        self,
        stop: PhaseStop,
        phase_letter_cap: int | None = None,
        decisions_walk: int | None = None,
        stop_after_decision: int | None = None,
    ) -> str:
        """Advance phases until a stop condition fires.

        Returns 'phase' (max_phase reached), 'letters' (total letter
        budget exhausted; run marked truncated), 'cap' (per-phase cap hit;
        truncated), or 'decided' (the phase named by stop_after_decision
        recorded its back-crossing decision, see below).

        With decisions_walk = i, every phase n >= i records in
        self.decisions[n] whether walk i touched line n-1 before freezing
        on line n+1 (the back-crossing event for that phase); the run
        keeps going after a touch, so one run decides every phase it
        completes.
        """
        cap = DEFAULT_PHASE_CAP if phase_letter_cap is None else phase_letter_cap
        max_letters = stop.max_letters
        env = self.env
        audit_log = env.audit if self.audit else None
        while True:
            if stop.max_phase is not None and self.phase >= stop.max_phase:
                return "phase"
            if self.phase >= MAX_STAGE:
                raise RangeError(
                    f"stage index must be in [0, {MAX_STAGE}], got {self.phase + 1}"
                )
            i = self.phase
            line_l = line_x(i)
            line_r = line_x(i + 1)
            active = min(i + 1, self.k)
            watching = decisions_walk is not None and i >= decisions_walk
            watch_j = decisions_walk - 1 if watching else -1
            watch_lo = line_x(i - 1) if watching else -1
            backcrossed = False

            # (a) the newly introduced walk crosses the finalized region
            if i >= 1 and active == i + 1:
                w = self.walks[active - 1]
                budget = cap
                if max_letters is not None:
                    budget = min(budget, max_letters - self.total_letters)
                if not self._solo_to_line(w, line_l, budget):
                    self.truncated = True
                    return (
                        "letters"
                        if max_letters is not None
                        and self.total_letters >= max_letters
                        else "cap"
                    )

            entries = [self.walks[j].t for j in range(active)]
            phase_walks = self.walks[:active]
            for w in phase_walks:
                w.frozen = False
            unfrozen = list(range(active))
            rs = env.reach[i]
            reach = env.reach
            phase_spent = 0
            first_alpha = None

            while unfrozen:
                if max_letters is not None and self.total_letters >= max_letters:
                    self._log_phase(i, entries, phase_walks)
                    self.truncated = True
                    return "letters"
                if phase_spent >= cap * active:
                    self._log_phase(i, entries, phase_walks)
                    self.truncated = True
                    return "cap"
                for j in list(unfrozen):
                    w = phase_walks[j]
                    letter = w.next_letter()
                    self.total_letters += 1
                    phase_spent += 1
                    x, y = w.x, w.y
                    if letter >= 2:
                        if (x + 1) & x == 0:
                            w.y = y + 1 if letter == 2 else y - 1
                            if w.acc is not None:
                                w.acc.append(1)
                            if w.y < env.y_min:
                                env.y_min = w.y
                            elif w.y > env.y_max:
                                env.y_max = w.y
                        elif w.acc is not None:
                            w.acc.append(0)
                    elif letter == 0:
                        if x >= line_l:
                            cur = rs.get(y, line_l)
                            if x + 1 > cur:
                                rs[y] = x + 1
                                if audit_log is not None:
                                    audit_log.append((w.t, y, x + 1))
                            w.x = x + 1
                            if w.acc is not None:
                                w.acc.append(1)
                            if w.x == line_r:
                                w.frozen = True
                                unfrozen.remove(j)
                                if first_alpha is None:
                                    first_alpha = y
                                if watching and watch_j == j:
                                    self.decisions[i] = backcrossed
                                    if stop_after_decision == i:
                                        self._log_phase(i, entries, phase_walks)
                                        return "decided"
                        else:
                            g = (x + 1).bit_length() - 1
                            if x + 1 <= reach[g].get(y, (1 << g) - 1):
                                w.x = x + 1
                                if w.acc is not None:
                                    w.acc.append(1)
                            elif w.acc is not None:
                                w.acc.append(0)
                    else:
                        if x == 0:
                            if w.acc is not None:
                                w.acc.append(0)
                        elif x > line_l:
                            w.x = x - 1
                            if w.acc is not None:
                                w.acc.append(1)
                        else:
                            g = x.bit_length() - 1
                            if x <= reach[g].get(y, (1 << g) - 1):
                                w.x = x - 1
                                if w.acc is not None:
                                    w.acc.append(1)
                                if (
                                    watching
                                    and watch_j == j
                                    and w.x == watch_lo
                                    and not backcrossed
                                ):
                                    backcrossed = True
                                    self.decisions[i] = True
                                    if stop_after_decision == i:
                                        self._log_phase(i, entries, phase_walks)
                                        return "decided"
                            elif w.acc is not None:
                                w.acc.append(0)

            # phase complete: finalize the gap and open the next
            self._log_phase(i, entries, phase_walks)
            env.alpha.append(first_alpha)
            if self.k == 1:
                # letter clocks coincide with the single-walk construction
                env.stage_history.append(
                    StageRecord(env.tau[i], self.walks[0].t, first_alpha)
                )
                env.tau.append(self.walks[0].t)
            self.phase += 1
            env.stage = self.phase
            env.reach.append({})

    def _log_phase(self, i: int, entries, phase_walks) -> None:
        for j, w in enumerate(phase_walks):
            self.phase_log.append(
                PhaseLogEntry(
                    phase=i,
                    walk=j + 1,
                    entry_t=entries[j],
                    freeze_t=w.t if w.frozen else -1,
                )
            )

    def snapshot_run(self) -> MultiWalkRun:
        states = tuple(
            WalkState(pos=(w.x, w.y), letters=w.t, steps=_count_steps(w))
            for w in self.walks
        )
        return MultiWalkRun(
            k=self.k,
            env=self.env,
            states=states,
            phase=self.phase,
            phase_log=tuple(self.phase_log),
            truncated=self.truncated,
            base_seed=self.base_seed,
            _accepted=tuple(w.acc for w in self.walks) if self.record else (),
        )


def _count_steps(w: _Walk) -> int:
    return int(sum(w.acc)) if w.acc is not None else -1


def run_multiwalk(
    base_seed: StreamSeed,
    k: int,
    stop: PhaseStop,
    record: bool = True,
    audit: bool = True,
    phase_letter_cap: int | None = None,
) -> MultiWalkRun:
    """Build the shared environment with k walks; see the module docstring.

    Walk j reads the letter stream at stream_id + (j - 1), so k=1
    reproduces the single-walk construction on the same seed exactly.
    """
    engine = MultiWalkEngine(base_seed, k, record=record, audit=audit)
    engine.run(stop, phase_letter_cap=phase_letter_cap)
    return engine.snapshot_run()


def default_eni_horizon(n: int, k: int) -> int:
    """Total-letter horizon for one multi-walk back-crossing trial.

    Building through phase n costs every active walk about what the
    single-walk stage does, so the single-walk horizon is scaled by the
    walk count (calibration notes live next to default_en_horizon).
    """
    from .exceptional import default_en_horizon

    return default_en_horizon(n) * max(1, k)


def estimate_Eni(
    n: int,
    i: int,
    trials: int,
    base_seed: StreamSeed,
    horizon: int | None = None,
    k: int | None = None,
) -> EnEstimate:
    """Estimate the chance that walk i, once on line n, backslides to
    line n-1 before reaching line n+1, inside a k-walk construction.

    k defaults to n+1, the full complement of walks the construction
    would have introduced by phase n.  The horizon counts letters summed
    over all walks; trials that exhaust it are censored.
    """
    if i < 1:
        raise RangeError(f"walk index must be >= 1, got {i}")
    if n < i:
        raise RangeError(f"need n >= i, got n={n}, i={i}")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    line_x(n + 1)
    if k is None:
        k = n + 1
    if k < i:
        raise RangeError(f"walk {i} never starts with only k={k} walks")
    if horizon is None:
        horizon = default_eni_horizon(n, k)
    hits = completions = censored = 0
    for t in range(trials):
        seed_t = base_seed.substream(t * TRIAL_STRIDE)
        engine = MultiWalkEngine(seed_t, k, record=False, audit=False)
        engine.run(
            PhaseStop(max_phase=n + 1, max_letters=horizon),
            decisions_walk=i,
            stop_after_decision=n,
        )
        got = engine.decisions.get(n)
        if got is None:
            censored += 1
        elif got:
            hits += 1
        else:
            completions += 1
    return EnEstimate.from_counts(
        n=n,
        trials=trials,
        hits=hits,
        completions=completions,
        censored=censored,
        seed=base_seed,
        horizon=horizon,
    )


def eni_decay_profile(
    i: int,
    n_lo: int,
    n_hi: int,
    trials: int,
    base_seed: StreamSeed,
    horizon: int | None = None,
    k: int | None = None,
) -> list:
    """Back-crossing estimates for walk i at every n in [n_lo, n_hi],
    sharing construction runs.

    One run to phase n_hi decides the back-crossing event of walk i for
    every phase it completes, so each trial contributes one Bernoulli per
    n (strongly positively correlated across n, which makes the decay
    trend visible at far fewer trials than independent per-n estimation).
    Phases a censored trial never completed count as censored at those n
    only.  k defaults to n_hi + 1, which reproduces the estimate_Eni
    default at every n: by phase n only walks 1..n+1 have started, so
    extra not-yet-started walks change nothing.
    """
    if i < 1:
        raise RangeError(f"walk index must be >= 1, got {i}")
    if n_lo < i or n_hi < n_lo:
        raise RangeError(f"need i <= n_lo <= n_hi, got i={i}, [{n_lo}, {n_hi}]")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    line_x(n_hi + 1)
    if k is None:
        k = n_hi + 1
    if k < i:
        raise RangeError(f"walk {i} never starts with only k={k} walks")
    if horizon is None:
        horizon = default_eni_horizon(n_hi, k)
    hits = {n: 0 for n in range(n_lo, n_hi + 1)}
    completions = {n: 0 for n in range(n_lo, n_hi + 1)}
    for t in range(trials):
        seed_t = base_seed.substream(t * TRIAL_STRIDE)
        engine = MultiWalkEngine(seed_t, k, record=False, audit=False)
        engine.run(
            PhaseStop(max_phase=n_hi + 1, max_letters=horizon),
            decisions_walk=i,
            stop_after_decision=n_hi,
        )
        for n in range(n_lo, n_hi + 1):
            got = engine.decisions.get(n)
            if got is None:
                continue
            if got:
                hits[n] += 1
            else:
                completions[n] += 1
    return [
        EnEstimate.from_counts(
            n=n,
            trials=trials,
            hits=hits[n],
            completions=completions[n],
            censored=trials - hits[n] - completions[n],
            seed=base_seed,
            horizon=horizon,
        )
        for n in range(n_lo, n_hi + 1)
    ]
