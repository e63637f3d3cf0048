"""Closed-form values, exact dynamic programs, and independent chain
simulations used to cross-check every estimator in the package.

Two implementations of each quantity is the working principle here: the
lattice builders produce an estimate, and this module produces the same
number from the stated law alone, without ever touching the builder code.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .lattice import ExplicitFinite, RangeError, Site, directions, neighbor
from .stats import EnEstimate, wilson_ci
from .words import StreamSeed, derive_key, words_at

# ---------------------------------------------------------------------------
# reports


def seed_label(seed: StreamSeed | None) -> str:
    if seed is None:
        return ""
    return f"{seed.master_seed}:{seed.stream_id}"


@dataclass(frozen=True)
class ReportRow:
    """One CSV row: an estimate with its interval, censoring and seed."""

    name: str
    param: str
    trials: int
    estimate: float
    ci_lo: float
    ci_hi: float
    censored: int
    seed: str
    z: float


@dataclass(frozen=True)
class ExperimentReport:
    """A named batch of estimate rows.

    wall_time is informational only and never serialized; outputs must be
    byte-identical across reruns with the same flags.
    """

    name: str
    parameters: dict
    rows: tuple
    seed: str
    wall_time: float = 0.0


# ---------------------------------------------------------------------------
# gambler's ruin


@dataclass(frozen=True)
class ExactRational:
    numerator: int
    denominator: int

    @property
    def value(self) -> float:
        return self.numerator / self.denominator


def gambler_exact(n: int) -> ExactRational:
    """Chance that a simple walk started at 1 reaches n before 0: 1/n."""
    if n < 1:
        raise RangeError(f"target must be >= 1, got {n}")
    return ExactRational(1, n)


def gambler_mc(n: int, trials: int, seed: StreamSeed, cap: int = 10**9) -> ExperimentReport:
    """Absorption simulation on {0..n} from 1; censors at the step cap.

    The cap exists to bound the worst case; absorption is almost surely
    finite and in practice no trial comes near it.
    """
    if n < 1:
        raise RangeError(f"target must be >= 1, got {n}")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    t0 = time.perf_counter()
    key = seed.key
    pos = np.ones(trials, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    won = np.zeros(trials, dtype=bool)
    step = 0
    while alive.any() and step < cap:
        idx = np.nonzero(alive)[0]
        words = words_at(key, step * np.uint64(trials) + idx.astype(np.uint64))
        moves = np.where((words >> np.uint64(63)).astype(bool), 1, -1)
        pos[idx] += moves
        hit_top = alive & (pos == n)
        hit_bot = alive & (pos == 0)
        won |= hit_top
        alive &= ~(hit_top | hit_bot)
        step += 1
    censored = int(alive.sum())
    decided = trials - censored
    hits = int(won.sum())
    p_hat = hits / decided if decided else math.nan
    lo, hi = wilson_ci(hits, decided)
    ref = 1.0 / n
    se = math.sqrt(ref * (1 - ref) / decided) if decided else math.nan
    z = (p_hat - ref) / se if decided and se > 0 else math.nan
    row = ReportRow(
        name="gambler",
        param=str(n),
        trials=trials,
        estimate=p_hat,
        ci_lo=lo,
        ci_hi=hi,
        censored=censored,
        seed=seed_label(seed),
        z=z,
    )
    return ExperimentReport(
        name="gambler",
        parameters={"n": n, "trials": trials, "cap": cap},
        rows=(row,),
        seed=seed_label(seed),
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# local time at the origin


def local_time_exact(N: int) -> float:
    """Expected visits of the simple walk to 0 during steps 1..N.

    Computed by exact evolution of the step-k distribution; the start
    instant is not a visit, so N=1 gives 0 and N=2 gives 1/2.
    """
    if N < 0:
        raise RangeError("N must be >= 0")
    if N == 0:
        return 0.0
    p = np.zeros(2 * N + 1)
    p[N] = 1.0
    total = 0.0
    half = 0.5
    for _ in range(N):
        q = np.zeros_like(p)
        q[:-1] += half * p[1:]
        q[1:] += half * p[:-1]
        p = q
        total += p[N]
    return float(total)


def local_time_closed_form(N: int) -> float:
    """Independent closed form for the same quantity.

    Sum of central binomial return probabilities, collapsed with the
    identity sum_{m<=M} C(2m,m)/4^m = (2M+1) C(2M,M)/4^M - 1 + 1 for the
    m=0 term removed; used only to cross-check the DP.
    """
    if N < 0:
        raise RangeError("N must be >= 0")
    M = N // 2
    if M == 0:
        return 0.0
    # (2M+1) * C(2M, M) / 4^M  - 1, computed in logs for large N
    log_term = (
        math.log(2 * M + 1)
        + math.lgamma(2 * M + 1)
        - 2 * math.lgamma(M + 1)
        - M * math.log(4.0)
    )
    return math.exp(log_term) - 1.0


def local_time_mc(N: int, trials: int, seed: StreamSeed) -> ExperimentReport:
    """Simulated mean visit count to 0 during steps 1..N, with a normal CI."""
    if N < 0:
        raise RangeError("N must be >= 0")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    t0 = time.perf_counter()
    key = seed.key
    counts = np.empty(trials, dtype=np.int64)
    if N == 0:
        counts[:] = 0
    else:
        words_per_trial = (N + 63) // 64
        chunk = max(1, (1 << 24) // max(N, 1))
        for lo in range(0, trials, chunk):
            hi = min(lo + chunk, trials)
            m = hi - lo
            counters = (
                np.arange(lo, hi, dtype=np.uint64)[:, None]
                * np.uint64(words_per_trial)
                + np.arange(words_per_trial, dtype=np.uint64)[None, :]
            )
            words = words_at(key, counters.ravel()).reshape(m, words_per_trial)
            bits = np.unpackbits(
                words.view(np.uint8), axis=1, count=None, bitorder="little"
            )[:, :N]
            steps = bits.astype(np.int16) * 2 - 1
            pos = np.cumsum(steps, axis=1, dtype=np.int32)
            counts[lo:hi] = (pos == 0).sum(axis=1)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    ref = local_time_exact(N) if N <= 100_000 else math.nan
    z = (mean - ref) / se if se and se > 0 and not math.isnan(ref) else math.nan
    row = ReportRow(
        name="localtime",
        param=str(N),
        trials=trials,
        estimate=mean,
        ci_lo=mean - 1.96 * se if trials > 1 else math.nan,
        ci_hi=mean + 1.96 * se if trials > 1 else math.nan,
        censored=0,
        seed=seed_label(seed),
        z=z,
    )
    return ExperimentReport(
        name="localtime",
        parameters={"N": N, "trials": trials},
        rows=(row,),
        seed=seed_label(seed),
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# exact transition DPs on finite graphs


def transition_dp(graph: ExplicitFinite, origin: Site, t: int) -> dict:
    """Distribution after t letters of the induced walk on a finite graph.

    Each tick draws one of the 2d letters uniformly and moves along the
    edge if Present, standing still otherwise.  Returns {site: probability}
    over the graph's box; the mass check (sums to 1 within 1e-12) is the
    caller's invariant and asserted here.
    """
    if t < 0:
        raise RangeError("t must be >= 0")
    sites = list(graph.sites_in_box())
    index = {s: i for i, s in enumerate(sites)}
    if origin not in index:
        raise RangeError(f"origin {origin} outside the graph box")
    dirs = directions(graph.d)
    # move_to[i][k] = index stepped to from site i under letter k (self if rejected)
    move_to = np.empty((len(sites), len(dirs)), dtype=np.int64)
    for i, s in enumerate(sites):
        for k, dn in enumerate(dirs):
            if graph.has_edge(s, dn):
                nb = neighbor(s, dn)
                if nb not in index:
                    raise RangeError(f"edge from {s} leaves the box at {nb}")
                move_to[i, k] = index[nb]
            else:
                move_to[i, k] = i
    p = np.zeros(len(sites))
    p[index[origin]] = 1.0
    w = 1.0 / len(dirs)
    for _ in range(t):
        q = np.zeros_like(p)
        for k in range(len(dirs)):
            np.add.at(q, move_to[:, k], w * p)
        p = q
    assert abs(p.sum() - 1.0) < 1e-12
    return {s: float(p[i]) for s, i in index.items()}


def srw_transition_dp(graph: ExplicitFinite, origin: Site, t: int) -> dict:
    """Distribution after t steps of the simple random walk on the graph
    (uniform over Present neighbors; isolated sites hold still).

    This is the degree-based chain the distance-decay bound is stated
    for, as opposed to the letter-driven lazy chain of transition_dp.
    """
    if t < 0:
        raise RangeError("t must be >= 0")
    sites = list(graph.sites_in_box())
    index = {s: i for i, s in enumerate(sites)}
    if origin not in index:
        raise RangeError(f"origin {origin} outside the graph box")
    dirs = directions(graph.d)
    nbrs = []
    for s in sites:
        row = [index[neighbor(s, dn)] for dn in dirs if graph.has_edge(s, dn)]
        nbrs.append(row)
    p = np.zeros(len(sites))
    p[index[origin]] = 1.0
    for _ in range(t):
        q = np.zeros_like(p)
        for i, row in enumerate(nbrs):
            if row:
                share = p[i] / len(row)
                for j in row:
                    q[j] += share
            else:
                q[i] += p[i]
        p = q
    assert abs(p.sum() - 1.0) < 1e-12
    return {s: float(p[i]) for s, i in index.items()}


# ---------------------------------------------------------------------------
# excursion-chain simulation of the back-crossing events

_T_END_23 = round((2 / 3) * 2**64)  # end threshold off the special row
_T_END_12 = 1 << 63  # end threshold on the special row
_T_LEFT_34 = 3 << 62  # then left/right split


class _ChainState:
    """Vectorized state of many excursion chains, in coordinates relative
    to the line (u = x - (2^n - 1)) and the special row (delta = y - alpha)."""

    def __init__(self, n: int, trials: int, seed: StreamSeed):
        self.n = n
        self.trials = trials
        self.width = 1 << n  # distance from the line to the right absorber
        self.left = -(1 << (n - 1))  # left absorber, reachable only at delta=0
        self.key_move = derive_key(seed.key, 1)
        self.key_y = derive_key(seed.key, 2)
        self.u = np.zeros(trials, dtype=np.int64)
        self.delta = np.zeros(trials, dtype=np.int64)
        self.excursions = np.ones(trials, dtype=np.int64)  # current index, 1-based
        self.round = 0

    def step(self, active: np.ndarray) -> tuple:
        """One accepted-step draw for every active chain.

        Returns (pos_success, neg_success, ended) boolean masks over all
        trials; ended marks excursions that finished without success this
        round (the y-chain already advanced for them).
        """
        trials = self.trials
        idx = np.nonzero(active)[0]
        base = np.uint64(self.round) * np.uint64(trials)
        words = words_at(self.key_move, base + idx.astype(np.uint64))
        u = self.u
        delta = self.delta
        pos_s = np.zeros(trials, dtype=bool)
        neg_s = np.zeros(trials, dtype=bool)
        ended = np.zeros(trials, dtype=bool)

        on_line = u[idx] == 0
        special = delta[idx] == 0

        # off the special row, on the line: end w.p. 2/3 else step right
        m = on_line & ~special
        wi = words[m]
        ii = idx[m]
        end = wi < np.uint64(_T_END_23)
        ended[ii[end]] = True
        u[ii[~end]] += 1

        # on the special row, on the line: end 1/2, left 1/4, right 1/4
        m = on_line & special
        wi = words[m]
        ii = idx[m]
        end = wi < np.uint64(_T_END_12)
        ended[ii[end]] = True
        go_left = ~end & (wi < np.uint64(_T_LEFT_34))
        go_right = ~end & ~go_left
        u[ii[go_left]] -= 1
        u[ii[go_right]] += 1

        # interior: symmetric step
        m = ~on_line
        wi = words[m]
        ii = idx[m]
        right = (wi >> np.uint64(63)).astype(bool)
        u[ii[right]] += 1
        u[ii[~right]] -= 1

        # absorption checks (left absorber exists only on the special row)
        pos_s[idx] = u[idx] == self.width
        neg_s[idx] = (delta[idx] == 0) & (u[idx] == self.left)

        # excursions that ended: y-chain advances, position back to the line
        ei = np.nonzero(ended)[0]
        if ei.size:
            ywords = words_at(self.key_y, base + ei.astype(np.uint64))
            up = (ywords >> np.uint64(63)).astype(bool)
            delta[ei] += np.where(up, 1, -1)
            self.excursions[ei] += 1
        # successful chains are the caller's business; reset handled there
        self.round += 1
        return pos_s, neg_s, ended


def excursion_chain_En(
    n: int, trials: int, seed: StreamSeed, max_rounds: int = 2_000_000
) -> EnEstimate:
    """Estimate the back-crossing probability from the excursion law alone.

    The chain never touches the lattice builder: each trial runs the
    stated per-excursion walk (end at the line with probability 2/3 off
    the special row, 1/2 on it; symmetric inside) with the excursion rows
    following a simple random walk, and stops at the first success.  A
    negative success is a back-crossing.
    """
    if n < 1:
        raise RangeError(f"back-crossing index must be >= 1, got {n}")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    if n > 40:
        raise RangeError(f"stage index must be in [0, 40], got {n}")
    st = _ChainState(n, trials, seed)
    outcome = np.zeros(trials, dtype=np.int8)  # 0 undecided, +1 pos, -1 neg
    active = np.ones(trials, dtype=bool)
    while active.any() and st.round < max_rounds:
        pos_s, neg_s, _ = st.step(active)
        outcome[pos_s & active] = 1
        outcome[neg_s & active] = -1
        active &= outcome == 0
    hits = int((outcome == -1).sum())
    completions = int((outcome == 1).sum())
    censored = int((outcome == 0).sum())
    return EnEstimate.from_counts(
        n=n,
        trials=trials,
        hits=hits,
        completions=completions,
        censored=censored,
        seed=seed,
        horizon=None,
    )


def excursion_success_frequency(
    n: int, excursions: int, seed: StreamSeed, chains: int = 32
) -> float:
    """Fraction of excursions ending in a positive success, pooled over
    several teleporting chains; compared against the coarse lower bound
    (1/100) 2^-n."""
    per_chain = max(1, (excursions + chains - 1) // chains)
    frac = teleport_F1F2(n, chains, seed, budget=per_chain, _raw_counts=True)
    return float(frac)


@dataclass(frozen=True)
class TeleportReport:
    """Failure frequencies of the teleporting chain over 3^n excursions."""

    n: int
    trials: int
    p_f1c: float  # no positive success among the first 3^n excursions
    p_f2c: float  # at least one negative success among them
    ci_f1c: tuple
    ci_f2c: tuple
    seed: StreamSeed | None

    @property
    def bound(self) -> float:
        """P(F1 fails) + P(F2 fails), the union bound on the back-crossing."""
        return self.p_f1c + self.p_f2c


def teleport_F1F2(
    n: int,
    trials: int,
    seed: StreamSeed,
    budget: int | None = None,
    _raw_counts: bool = False,
):
    """Run the teleporting chain for exactly 3^n excursions per trial.

    Successes never absorb: the chain teleports back to the line and the
    row walk carries on, so successes can be counted per excursion.  F1
    fails when no excursion succeeds positively; F2 fails when any
    succeeds negatively.
    """
    if not 1 <= n <= 8:
        raise RangeError(f"teleport chain supports 1 <= n <= 8, got {n}")
    if trials < 0:
        raise RangeError("trials must be >= 0")
    if trials == 0:
        return TeleportReport(
            n=n,
            trials=0,
            p_f1c=math.nan,
            p_f2c=math.nan,
            ci_f1c=(math.nan, math.nan),
            ci_f2c=(math.nan, math.nan),
            seed=seed,
        )
    budget = 3**n if budget is None else budget
    st = _ChainState(n, trials, seed)
    pos_count = np.zeros(trials, dtype=np.int64)
    neg_count = np.zeros(trials, dtype=np.int64)
    done = np.zeros(trials, dtype=bool)
    while not done.all():
        active = ~done
        pos_s, neg_s, _ = st.step(active)
        pos_count[pos_s] += 1
        neg_count[neg_s] += 1
        # a success ends the excursion too: teleport to the line, advance y
        succ = np.nonzero(pos_s | neg_s)[0]
        if succ.size:
            st.u[succ] = 0
            ywords = words_at(
                st.key_y,
                np.uint64(st.round - 1) * np.uint64(trials)
                + np.uint64(2**63)  # separate counter plane from plain ends
                + succ.astype(np.uint64),
            )
            up = (ywords >> np.uint64(63)).astype(bool)
            st.delta[succ] += np.where(up, 1, -1)
            st.excursions[succ] += 1
        done = st.excursions > budget
    if _raw_counts:
        return float(pos_count.sum()) / float(budget * trials)
    f1c = int((pos_count == 0).sum())
    f2c = int((neg_count > 0).sum())
    return TeleportReport(
        n=n,
        trials=trials,
        p_f1c=f1c / trials,
        p_f2c=f2c / trials,
        ci_f1c=wilson_ci(f1c, trials),
        ci_f2c=wilson_ci(f2c, trials),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# decay fits and escape exponents


class InsufficientPointsError(RangeError):
    """Too few decided, nonzero estimates for a regression."""


@dataclass(frozen=True)
class DecayFit:
    """Weighted least-squares fit of log p-hat against n."""

    xs: tuple
    ys: tuple
    slope: float
    intercept: float
    slope_ci: tuple

    @property
    def rate(self) -> float:
        """The implied per-step decay factor exp(slope)."""
        return math.exp(self.slope)


def decay_fit(estimates) -> DecayFit:
    """Fit log p-hat = intercept + slope * n by weighted least squares.

    Only decided, nonzero estimates enter; each point is weighted by the
    inverse variance of log p-hat, taken from its Wilson interval width
    via the delta method.
    """
    xs = []
    ys = []
    ws = []
    for est in estimates:
        if est.decided <= 0 or est.hits <= 0 or not math.isfinite(est.p_hat):
            continue
        lo, hi = est.wilson_ci
        sd_log = (hi - lo) / (2 * 1.96 * est.p_hat)
        xs.append(float(est.n))
        ys.append(math.log(est.p_hat))
        ws.append(1.0 / max(sd_log * sd_log, 1e-30))
    if len(xs) < 3:
        raise InsufficientPointsError(
            f"decay fit needs >= 3 decided nonzero points, got {len(xs)}"
        )
    x = np.array(xs)
    y = np.array(ys)
    w = np.array(ws)
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    slope = float((w * (x - xbar) * (y - ybar)).sum() / sxx)
    intercept = float(ybar - slope * xbar)
    se = math.sqrt(1.0 / sxx)
    return DecayFit(
        xs=tuple(xs),
        ys=tuple(ys),
        slope=slope,
        intercept=intercept,
        slope_ci=(slope - 1.96 * se, slope + 1.96 * se),
    )


@dataclass(frozen=True)
class EscapeFit:
    """Fitted growth exponent of max displacement against time."""

    alpha: float
    ci: tuple
    ts: tuple
    ys: tuple


def escape_exponent(transcript) -> EscapeFit:
    """Regress log max displacement on log t over a geometric time grid.

    Displacement is graph (L1) distance from the start.  The floor at
    distance 1 keeps early zero-displacement times finite; a walk that
    never moves fits alpha = 0 exactly.
    """
    if transcript.n_letters < 1000:
        raise RangeError("escape exponent needs >= 1000 letters")
    pos = transcript.positions()
    dist = np.abs(pos - np.asarray(transcript.start)).sum(axis=1)
    running = np.maximum.accumulate(dist)
    N = transcript.n_letters
    grid = np.unique(
        np.round(np.geomspace(10, N, num=30)).astype(np.int64)
    )
    ts = grid.astype(float)
    ys = np.log(np.maximum(running[grid], 1).astype(float))
    lx = np.log(ts)
    xbar = lx.mean()
    ybar = ys.mean()
    sxx = ((lx - xbar) ** 2).sum()
    slope = float(((lx - xbar) * (ys - ybar)).sum() / sxx)
    resid = ys - (ybar + slope * (lx - xbar))
    dof = max(len(ts) - 2, 1)
    se = math.sqrt(float((resid**2).sum()) / dof / sxx)
    return EscapeFit(
        alpha=slope,
        ci=(slope - 1.96 * se, slope + 1.96 * se),
        ts=tuple(int(t) for t in grid),
        ys=tuple(float(v) for v in ys),
    )
