"""Branching random walk with persistent parents, and the bounds that
control it.

The offspring convention multiplies population: at every time step each
living particle first spawns extra children (one with probability eps
under the reduced law, or per a general vector over extra-child counts),
then every particle, newborns included, reads one uniform letter and
moves under induced-walk semantics.  Populations are therefore
non-decreasing under the reduced law and N_j has mean (1 + mean_extra)^j.

Alongside the process itself the module carries the quantitative tools
used to reason about it: an exact Chernoff lower-tail bound for
binomials, the Carne transition-probability bound with a breadth-first
metric, an empirical displacement-tail check, and recurrence
certification: a finite-horizon certificate that some branch of the tree
visits every reachable site r times.  The tiny-box sweep certifies every
spanning subgraph of a small box, the desk-scale stand-in for a
for-every-subgraph quantifier.

Randomness layout: a run with stream key K gives particle p the letter
stream derive(K, 2p) and the spawn stream derive(K, 2p + 1).  Letter
index 0 is the particle's first move (round max(birth, 1): newborns move
in their birth round, the root first moves in round 1).  Spawn index 0
is its first spawn opportunity, the round after birth.  Any particle
therefore replays in isolation from its id and birth time alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .lattice import (
    Edge,
    EdgeOracle,
    ExplicitFinite,
    LatticeError,
    RangeError,
    Site,
    direction_from_code,
    directions,
    neighbor,
    reachable_sites,
)
from .walk import WalkState, induced_step
from .words import (
    SLOTS,
    StreamSeed,
    bernoulli_threshold,
    derive_key,
    derive_keys,
    letter_codes,
    word_at,
    words_at,
)

_U = np.uint64

#: Default Galton-Watson population cap.
GW_POPULATION_CAP = 10_000_000


class PopulationCapError(LatticeError):
    """Population exceeded its cap; .trajectory holds the partial counts."""

    def __init__(self, message: str, trajectory: list):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class OffspringLaw:
    """Distribution of the number of extra children per particle per step.

    probs[k] is the chance of k extra children.  The parent always
    persists, so the population multiplies by (1 + mean_extra) per step
    in expectation.  The reduced law is the two-point vector
    (1 - eps, eps).
    """

    probs: tuple

    def __post_init__(self):
        if len(self.probs) < 1:
            raise RangeError("offspring law needs at least one probability")
        if any(p < 0 for p in self.probs):
            raise RangeError("offspring probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise RangeError(
                f"offspring probabilities must sum to 1, got {sum(self.probs)}"
            )
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def reduced(cls, eps: float) -> "OffspringLaw":
        """Parent persists; one extra child with probability eps."""
        if not 0.0 <= eps <= 1.0:
            raise RangeError(f"eps must be in [0, 1], got {eps}")
        return cls((1.0 - eps, eps))

    @property
    def is_reduced(self) -> bool:
        return len(self.probs) == 2

    @property
    def extra_child_prob(self) -> float:
        if not self.is_reduced:
            raise RangeError("extra_child_prob is defined for the reduced law only")
        return self.probs[1]

    @property
    def mean_extra(self) -> float:
        return float(sum(k * p for k, p in enumerate(self.probs)))

    def spawn_thresholds(self) -> list:
        """Exact cutoffs: k extra children when thr[k-1] <= word < thr[k].

        Integer thresholds round(cum_k * 2^64); entries that reach 2^64
        are dropped since no 64-bit word attains them, which makes a zero
        tail probability exactly zero (eps = 0 never spawns).
        """
        out = []
        acc = 0.0
        for p in self.probs[:-1]:
            acc += p
            t = bernoulli_threshold(min(acc, 1.0))
            if t < (1 << 64):
                out.append(t)
        return out


def _spawn_count(thresholds: list, word: int) -> int:
    k = 0
    for t in thresholds:
        if word >= t:
            k += 1
    return k


def gw_population(
    j: int,
    law: OffspringLaw,
    seed: StreamSeed,
    cap: int = GW_POPULATION_CAP,
) -> list:
    """Exact Galton-Watson population trajectory [N_0, ..., N_j].

    N_0 = 1; each step every particle independently adds extra children
    per the law (the parent persists).  Sampling is aggregated: under the
    reduced law the increment is Binomial(N, eps), generally a
    multinomial over extra-child counts, drawn from a numpy generator
    seeded from the stream, so a trajectory costs O(j) regardless of
    population size.
    """
    if j < 0:
        raise RangeError(f"time must be >= 0, got {j}")
    if cap < 1:
        raise RangeError("population cap must be >= 1")
    rng = np.random.Generator(np.random.PCG64(word_at(seed.key, 0)))
    traj = [1]
    n = 1
    for _ in range(j):
        if law.is_reduced:
            extra = int(rng.binomial(n, law.probs[1]))
        else:
            counts = rng.multinomial(n, law.probs)
            extra = int(sum(k * c for k, c in enumerate(counts)))
        n += extra
        if n > cap:
            raise PopulationCapError(
                f"population {n} exceeded cap {cap} at time {len(traj)}", traj
            )
        traj.append(n)
    return traj


@dataclass(frozen=True)
class ParticleRecord:
    """Birth data of one particle; the root has parent_id -1."""

    id: int
    parent_id: int
    birth_time: int


def _first_move_round(birth: int) -> int:
    return birth if birth > 0 else 1


class ParticleTree:
    """Full record of one branching run: births, moves, populations.

    moves[p] pairs the letter codes particle p read with their acceptance
    flags; entry i belongs to round first-move(p) + i.  The position of
    any lineage at any time follows by composing accepted moves down the
    ancestor chain, which branch_positions does.
    """

    def __init__(self, d: int, seed: StreamSeed, horizon: int):
        self.d = d
        self.seed = seed
        self.horizon = horizon
        self.parents = [-1]
        self.births = [0]
        self.moves = [(bytearray(), bytearray())]
        self.population = [1]
        self.final_positions = None
        self.truncated = False

    @property
    def n_particles(self) -> int:
        return len(self.parents)

    def particle(self, p: int) -> ParticleRecord:
        return ParticleRecord(p, self.parents[p], self.births[p])

    def children_of(self, p: int) -> list:
        return [q for q in range(p + 1, self.n_particles) if self.parents[q] == p]

    def leaves(self) -> list:
        has_child = [False] * self.n_particles
        for q in range(1, self.n_particles):
            has_child[self.parents[q]] = True
        return [p for p, h in enumerate(has_child) if not h]

    def branch_positions(self, p: int) -> list:
        """Sites of the lineage of p at times 0..horizon, root first.

        The lineage position at time t is the position of the youngest
        ancestor of p already born at t; the parent persists through
        every spawn, so the sequence is a single walk trajectory.
        """
        chain = []
        q = p
        while q >= 0:
            chain.append(q)
            q = self.parents[q]
        chain.reverse()
        dirs = [direction_from_code(c, self.d) for c in range(2 * self.d)]
        pos = [tuple([0] * self.d)]
        t = 0
        for idx, q in enumerate(chain):
            handoff = (
                self.births[chain[idx + 1]] if idx + 1 < len(chain) else None
            )
            letters, accepted = self.moves[q]
            start = t + 1 - _first_move_round(self.births[q])
            for i in range(start, len(letters)):
                if handoff is not None and t + 1 >= handoff:
                    break
                t += 1
                cur = pos[-1]
                pos.append(
                    neighbor(cur, dirs[letters[i]]) if accepted[i] else cur
                )
        return pos


def run_branching(
    seed: StreamSeed,
    d: int,
    law: OffspringLaw,
    horizon: int,
    particle_cap: int,
    oracle: EdgeOracle,
) -> ParticleTree:
    """Reference branching run; returns the full ParticleTree.

    Each round: every living particle spawns extra children at its
    current site (children get fresh ids in parent-id order), then every
    particle, newborns included, reads one letter from its own stream and
    moves under induced semantics.  When a spawn round would push the
    particle count past particle_cap the round is skipped and the tree is
    flagged truncated; existing particles keep walking to the horizon.
    """
    if horizon < 0:
        raise RangeError("horizon must be >= 0")
    if particle_cap < 1:
        raise RangeError("particle cap must be >= 1")
    tree = ParticleTree(d, seed, horizon)
    run_key = seed.key
    thresholds = law.spawn_thresholds()
    dirs = [direction_from_code(c, d) for c in range(2 * d)]
    positions = [tuple([0] * d)]
    letter_keys = [derive_key(run_key, 0)]
    spawn_keys = [derive_key(run_key, 1)]
    for step in range(1, horizon + 1):
        n = len(positions)
        if thresholds and not tree.truncated:
            spawned = []
            for p in range(n):
                w = word_at(spawn_keys[p], step - tree.births[p] - 1)
                for _ in range(_spawn_count(thresholds, w)):
                    spawned.append(p)
            if n + len(spawned) > particle_cap:
                tree.truncated = True
            else:
                for p in spawned:
                    q = len(positions)
                    positions.append(positions[p])
                    letter_keys.append(derive_key(run_key, 2 * q))
                    spawn_keys.append(derive_key(run_key, 2 * q + 1))
                    tree.parents.append(p)
                    tree.births.append(step)
                    tree.moves.append((bytearray(), bytearray()))
        tree.population.append(len(positions))
        for p in range(len(positions)):
            move_idx = step - _first_move_round(tree.births[p])
            code = letter_codes(letter_keys[p], move_idx, 1, d=d)[0]
            state, ok = induced_step(WalkState(positions[p]), oracle, dirs[code])
            positions[p] = state.pos
            letters, accepted = tree.moves[p]
            letters.append(code)
            accepted.append(1 if ok else 0)
    tree.final_positions = list(positions)
    return tree


@dataclass(frozen=True)
class RecurrenceCertificate:
    """Finite-horizon recurrence surrogate for one subgraph run.

    certified means some root-to-leaf branch of the tree visited every
    site reachable from the origin at least r times within the horizon;
    witness is the certifying particle's id (None when not certified).
    """

    subgraph_id: int
    reachable: int
    certified: bool
    r: int
    horizon: int
    witness: int | None


def recurrence_certificate(
    tree: ParticleTree,
    oracle: ExplicitFinite,
    r: int,
    horizon: int | None = None,
    subgraph_id: int = -1,
) -> RecurrenceCertificate:
    """Certify a finished tree by depth-first branch search.

    Visits are time instants: a branch visits its site once per time in
    [0, horizon], standing still included, so the all-Absent environment
    certifies any r <= horizon + 1.  The search walks particles in id
    order down the tree, carrying one visit-count map updated
    incrementally (push on descent, pop on backtrack), and stops at the
    first particle whose lineage has covered everything.
    """
    if r < 1:
        raise RangeError("required visit count must be >= 1")
    if horizon is None:
        horizon = tree.horizon
    if horizon > tree.horizon:
        raise RangeError(
            f"tree ran to time {tree.horizon}, cannot certify at {horizon}"
        )
    origin = tuple([0] * tree.d)
    target = frozenset(reachable_sites(oracle, origin, oracle.box))
    need = len(target)
    dirs = [direction_from_code(c, tree.d) for c in range(2 * tree.d)]

    kids = [[] for _ in range(tree.n_particles)]
    for q in range(1, tree.n_particles):
        kids[tree.parents[q]].append(q)

    counts = {}
    satisfied = 0

    def push(site) -> bool:
        nonlocal satisfied
        c = counts.get(site, 0) + 1
        counts[site] = c
        if c == r and site in target:
            satisfied += 1
        return satisfied == need

    def pop(sites) -> None:
        nonlocal satisfied
        for site in reversed(sites):
            c = counts[site]
            counts[site] = c - 1
            if c == r and site in target:
                satisfied -= 1

    def walk(q: int, site, t: int):
        """Descend particle q's own segment; `site` at time t is already
        counted by the caller.  Returns the witness id or None."""
        letters, accepted = tree.moves[q]
        children = kids[q]
        ki = 0
        pushed = []
        cur = site
        for code, ok in zip(letters, accepted):
            if t >= horizon:
                break
            while ki < len(children) and tree.births[children[ki]] == t + 1:
                w = walk(children[ki], cur, t)
                if w is not None:
                    pop(pushed)
                    return w
                ki += 1
            t += 1
            if ok:
                cur = neighbor(cur, dirs[code])
            pushed.append(cur)
            if push(cur):
                pop(pushed)
                return q
        pop(pushed)
        return None

    if push(origin):
        witness = 0
    else:
        witness = walk(0, origin, 0)
    return RecurrenceCertificate(
        subgraph_id=subgraph_id,
        reachable=need,
        certified=witness is not None,
        r=r,
        horizon=horizon,
        witness=witness,
    )


def _component_transitions(oracle: ExplicitFinite):
    """Index the origin's component and tabulate induced moves.

    Returns (sites, table): sites is the sorted reachable set, table maps
    (site index, letter code) to the destination index, standing still on
    absent edges.  Induced walks never leave the component, so the table
    is closed.
    """
    origin = tuple([0] * oracle.d)
    sites = reachable_sites(oracle, origin, oracle.box)
    index = {s: i for i, s in enumerate(sites)}
    table = np.empty((len(sites), 2 * oracle.d), dtype=np.int32)
    for i, s in enumerate(sites):
        for dn in directions(oracle.d):
            if oracle.has_edge(s, dn):
                table[i, dn.code] = index[neighbor(s, dn)]
            else:
                table[i, dn.code] = i
    return sites, table


def _certify_engine(
    oracle: ExplicitFinite,
    law: OffspringLaw,
    horizon: int,
    r: int,
    seed: StreamSeed,
    particle_cap: int,
    subgraph_id: int,
    collect_tree: bool,
):
    """Array-based branching run that certifies online.

    Each particle row carries its lineage's per-site visit counts (copied
    to children at birth, so done == site count means the root-to-particle
    branch covered everything).  Streams and ids match run_branching word
    for word; the whole population advances one round per numpy pass and
    the run stops at the first covering particle.  Returns the certificate
    plus (parents, births) arrays when collect_tree is set.
    """
    if r < 1:
        raise RangeError("required visit count must be >= 1")
    if r > 255:
        raise RangeError("array certifier supports visit counts up to 255")
    if horizon < 0:
        raise RangeError("horizon must be >= 0")
    if particle_cap < 1:
        raise RangeError("particle cap must be >= 1")
    d = oracle.d
    sites, table = _component_transitions(oracle)
    n_sites = len(sites)
    origin_idx = sites.index(tuple([0] * d))
    thresholds = law.spawn_thresholds()
    run_key = seed.key

    pos = np.array([origin_idx], dtype=np.int32)
    births = np.array([0], dtype=np.int64)
    parents = np.array([-1], dtype=np.int64)
    first_move = np.array([1], dtype=np.int64)
    lkeys = derive_keys(run_key, np.array([0], dtype=np.uint64))
    skeys = derive_keys(run_key, np.array([1], dtype=np.uint64))
    counts = np.zeros((1, n_sites), dtype=np.uint8)
    counts[0, origin_idx] = 1
    done = np.array([1 if r == 1 else 0], dtype=np.int32)

    def cert(flag: bool, witness):
        return RecurrenceCertificate(
            subgraph_id=subgraph_id,
            reachable=n_sites,
            certified=flag,
            r=r,
            horizon=horizon,
            witness=witness,
        )

    def result(c):
        if collect_tree:
            return c, parents, births
        return c

    if done[0] == n_sites:
        return result(cert(True, 0))

    alphabet = _U(2 * d)
    truncated = False
    for t in range(1, horizon + 1):
        n = len(pos)
        if thresholds and not truncated:
            w = words_at(skeys, (t - births - 1).astype(np.uint64))
            extras = np.zeros(n, dtype=np.int64)
            for thr in thresholds:
                extras += w >= _U(thr)
            m = int(extras.sum())
            if m:
                if n + m > particle_cap:
                    truncated = True
                else:
                    par = np.repeat(np.arange(n, dtype=np.int64), extras)
                    q = np.arange(n, n + m, dtype=np.uint64)
                    lkeys = np.concatenate([lkeys, derive_keys(run_key, 2 * q)])
                    skeys = np.concatenate(
                        [skeys, derive_keys(run_key, 2 * q + _U(1))]
                    )
                    pos = np.concatenate([pos, pos[par]])
                    counts = np.concatenate([counts, counts[par]])
                    done = np.concatenate([done, done[par]])
                    parents = np.concatenate([parents, par])
                    births = np.concatenate(
                        [births, np.full(m, t, dtype=np.int64)]
                    )
                    first_move = np.concatenate(
                        [first_move, np.full(m, t, dtype=np.int64)]
                    )
        idx = ((t - first_move) * SLOTS).astype(np.uint64)
        codes = (words_at(lkeys, idx) % alphabet).astype(np.intp)
        pos = table[pos, codes]
        rows = np.arange(len(pos))
        c = counts[rows, pos]
        newly = c == r - 1
        under = c < r
        counts[rows[under], pos[under]] = c[under] + 1
        done += newly
        if newly.any():
            covered = np.nonzero(done == n_sites)[0]
            if covered.size:
                return result(cert(True, int(covered[0])))
    return result(cert(False, None))


def certify_branching(
    oracle: ExplicitFinite,
    law: OffspringLaw,
    horizon: int,
    r: int,
    seed: StreamSeed,
    particle_cap: int = 100_000,
    subgraph_id: int = -1,
) -> RecurrenceCertificate:
    """Run-and-certify in one pass, without materializing the tree.

    Law-identical to run_branching followed by recurrence_certificate at
    the same horizon (same streams, ids, and spawn schedule), but online:
    it stops at the first round in which some branch has covered the
    component, so the usual case costs tens of rounds.  The witness is
    the lowest particle id among the earliest covering branches, which
    may differ from the depth-first witness on the same tree; certified
    flags always agree.  When the spawn round would exceed particle_cap
    branching shuts off and the surviving particles keep walking.
    """
    return _certify_engine(
        oracle, law, horizon, r, seed, particle_cap, subgraph_id, False
    )


def box_interior_edges(d: int, box: tuple) -> list:
    """The box's interior edges (both endpoints inside), in sorted order.

    The sweep's subgraph ids are bitmasks over exactly this list: bit k
    set means edge k is Present.
    """
    if len(box) != d:
        raise RangeError(f"box must have {d} (lo, hi) pairs")
    edges = []
    lo_hi = [range(lo, hi + 1) for lo, hi in box]

    def rec(prefix, axis):
        if axis == d:
            site = tuple(prefix)
            for a in range(d):
                if site[a] < box[a][1]:
                    edges.append(Edge(site, a))
            return
        for c in lo_hi[axis]:
            rec(prefix + [c], axis + 1)

    rec([], 0)
    edges.sort()
    return edges


def tiny_box_sweep(
    law: OffspringLaw,
    horizon: int,
    r: int,
    seed: StreamSeed,
    d: int = 2,
    box: tuple | None = None,
    particle_cap: int = 100_000,
    jobs: int | None = None,
) -> list:
    """Certify every spanning subgraph of a small box, one tree each.

    Subgraph s keeps exactly the interior edges whose bit is set in s
    (box_interior_edges order); exterior edges are Absent.  Each subgraph
    runs on its own derived stream seed.substream(s), so any row can be
    reproduced in isolation.  Returns RecurrenceCertificates in id order;
    jobs > 1 splits the id range across processes.
    """
    if box is None:
        box = tuple((-1, 1) for _ in range(d))
    edges = box_interior_edges(d, box)
    if len(edges) > 16:
        raise RangeError(
            f"box has {len(edges)} interior edges; the sweep caps at 16"
        )
    total = 1 << len(edges)
    args = (law, horizon, r, seed, particle_cap, d, box, edges)
    if jobs is None or jobs <= 1:
        return _sweep_chunk((0, total) + args)
    jobs = min(jobs, total)
    import concurrent.futures

    bounds = np.linspace(0, total, jobs + 1, dtype=int)
    chunks = [
        (int(a), int(b)) + args for a, b in zip(bounds[:-1], bounds[1:]) if a < b
    ]
    out = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_sweep_chunk, chunks):
            out.extend(part)
    return out


def _sweep_chunk(packed) -> list:
    lo, hi, law, horizon, r, seed, particle_cap, d, box, edges = packed
    out = []
    for s in range(lo, hi):
        present = frozenset(e for k, e in enumerate(edges) if s >> k & 1)
        oracle = ExplicitFinite(d, box, present)
        out.append(
            certify_branching(
                oracle,
                law,
                horizon,
                r,
                seed.substream(s),
                particle_cap=particle_cap,
                subgraph_id=s,
            )
        )
    return out


def chernoff_bound(n: int, p: float, eps: float) -> float:
    """Lower-tail bound exp(-eps^2 * n * p / 2) for Binomial(n, p)."""
    if n < 0:
        raise RangeError(f"n must be >= 0, got {n}")
    if not 0.0 < p < 1.0:
        raise RangeError(f"p must be in (0, 1), got {p}")
    if eps <= 0.0:
        raise RangeError(f"eps must be > 0, got {eps}")
    return math.exp(-(eps**2) * n * p / 2.0)


def binomial_lower_tail(n: int, p, k: int) -> Fraction:
    """Exact P(Binomial(n, p) <= k) as a Fraction.

    Pass p as a Fraction (or a value Fraction() accepts exactly) when the
    comparison must be airtight; floats convert via their exact binary
    value.
    """
    if n < 0:
        raise RangeError(f"n must be >= 0, got {n}")
    pf = p if isinstance(p, Fraction) else Fraction(p)
    if not 0 <= pf <= 1:
        raise RangeError(f"p must be in [0, 1], got {p}")
    if k < 0:
        return Fraction(0)
    k = min(k, n)
    q = 1 - pf
    return sum(
        Fraction(math.comb(n, i)) * pf**i * q ** (n - i) for i in range(k + 1)
    )


class DisconnectedPairError(LatticeError):
    """Carne bound asked for two sites in different components."""


@lru_cache(maxsize=256)
def _bfs_distances(graph: ExplicitFinite, origin: Site) -> dict:
    # callers treat the result as read-only, so one table per (graph,
    # origin) pair is shared
    dirs = directions(graph.d)
    dist = {tuple(origin): 0}
    frontier = [tuple(origin)]
    while frontier:
        nxt = []
        for site in frontier:
            for dr in dirs:
                if not graph.has_edge(site, dr):
                    continue
                other = neighbor(site, dr)
                if other not in dist:
                    dist[other] = dist[site] + 1
                    nxt.append(other)
        frontier = nxt
    return dist


def carne_bound(graph: ExplicitFinite, x: Site, y: Site, t: int) -> float:
    """Transition-probability ceiling 2*sqrt(deg y/deg x)*exp(-rho^2/2t).

    rho is breadth-first graph distance.  Valid for the simple random
    walk on the graph (uniform over present neighbors); degrees must
    both be >= 1 and the sites connected.
    """
    if t < 1:
        raise RangeError(f"time must be >= 1, got {t}")
    x = tuple(x)
    y = tuple(y)
    dx = graph.degree(x)
    dy = graph.degree(y)
    if dx < 1 or dy < 1:
        raise RangeError("Carne bound needs degree >= 1 at both sites")
    dist = _bfs_distances(graph, x)
    if y not in dist:
        raise DisconnectedPairError(f"{y} is not reachable from {x}")
    rho = dist[y]
    return 2.0 * math.sqrt(dy / dx) * math.exp(-(rho**2) / (2.0 * t))


@dataclass(frozen=True)
class DisplacementReport:
    """Empirical escape tail vs the explicit displacement bound."""

    empirical: float
    bound: float
    trials: int
    delta: float
    n: int


def displacement_tail_check(
    graph,
    delta: float,
    n: int,
    trials: int,
    seed: StreamSeed,
) -> DisplacementReport:
    """Empirical P(n-step SRW leaves the graph-distance delta*n ball)
    against sqrt(8d) * (2n+1)^d * exp(-delta^2 * n / 2).

    The walk is the simple random walk on the graph: each step moves to
    one uniformly chosen present neighbor (for the full lattice this is
    the unrestricted lattice walk and the metric is the L1 norm).
    Neighbor picks reduce a 64-bit word modulo the degree; the modulo
    bias is below 2^-61 and ignored.
    """
    if not 0.0 < delta <= 1.0:
        raise RangeError(f"delta must be in (0, 1], got {delta}")
    if n < 1:
        raise RangeError(f"n must be >= 1, got {n}")
    if trials < 1:
        raise RangeError("trials must be >= 1")
    d = graph.d
    bound = math.sqrt(8 * d) * float(2 * n + 1) ** d * math.exp(-(delta**2) * n / 2)
    radius = delta * n
    if isinstance(graph, ExplicitFinite):
        exceed = _explicit_srw_tail(graph, n, trials, seed, radius)
    else:
        exceed = _full_lattice_tail(d, n, trials, seed, radius)
    return DisplacementReport(
        empirical=exceed / trials, bound=bound, trials=trials, delta=delta, n=n
    )


def _trial_keys(seed: StreamSeed, lo: int, m: int) -> np.ndarray:
    """One derived key per trial; plane 2^32 of the base stream."""
    counters = np.arange(lo, lo + m, dtype=np.uint64) + _U(1 << 32)
    return words_at(_U(seed.key), counters)


def _full_lattice_tail(
    d: int, n: int, trials: int, seed: StreamSeed, radius: float
) -> int:
    """Count trials whose L1 displacement after n steps exceeds radius."""
    exceed = 0
    chunk = max(1, min(trials, 4_000_000 // max(n, 1)))
    deltas = np.zeros((2 * d, d), dtype=np.int64)
    for c in range(2 * d):
        dr = direction_from_code(c, d)
        deltas[c, dr.axis] = dr.sign
    for lo in range(0, trials, chunk):
        m = min(chunk, trials - lo)
        keys = _trial_keys(seed, lo, m)
        pos = np.zeros((m, d), dtype=np.int64)
        for step in range(n):
            w = words_at(keys, np.full(m, step, dtype=np.uint64))
            codes = (w % _U(2 * d)).astype(np.intp)
            pos += deltas[codes]
        exceed += int((np.abs(pos).sum(axis=1) > radius).sum())
    return exceed


def _explicit_srw_tail(
    graph: ExplicitFinite, n: int, trials: int, seed: StreamSeed, radius: float
) -> int:
    """SRW on an explicit graph via a site-indexed neighbor table."""
    origin = tuple([0] * graph.d)
    dist = _bfs_distances(graph, origin)
    sites = sorted(dist)
    index = {s: i for i, s in enumerate(sites)}
    dirs = directions(graph.d)
    nbr_lists = []
    for s in sites:
        row = [index[neighbor(s, dr)] for dr in dirs if graph.has_edge(s, dr)]
        if not row:
            row = [index[s]]  # isolated origin stands still
        nbr_lists.append(row)
    degs = np.array([len(r) for r in nbr_lists], dtype=np.uint64)
    width = int(degs.max())
    table = np.zeros((len(sites), width), dtype=np.int32)
    for i, row in enumerate(nbr_lists):
        table[i, : len(row)] = row
    dvec = np.array([dist[s] for s in sites], dtype=np.float64)

    exceed = 0
    chunk = max(1, min(trials, 4_000_000 // max(n, 1)))
    for lo in range(0, trials, chunk):
        m = min(chunk, trials - lo)
        keys = _trial_keys(seed, lo, m)
        cur = np.full(m, index[origin], dtype=np.int32)
        for step in range(n):
            w = words_at(keys, np.full(m, step, dtype=np.uint64))
            pick = (w % degs[cur]).astype(np.intp)
            cur = table[cur, pick]
        exceed += int((dvec[cur] > radius).sum())
    return exceed
