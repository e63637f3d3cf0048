"""Command-line front end: every experiment as a replayable subcommand.

Each subcommand reruns one estimator or environment builder from explicit
flags and prints (or writes) its result as CSV or JSON.  Outputs are a
pure function of the flag set: the seed is always explicit, wall-clock
time is never serialized, and rows are emitted in a fixed order, so the
same invocation produces byte-identical bytes.  Every report leads with
a `# config=<hash>` comment, the hash of the canonical JSON form of the
run configuration, so any data file names the flags that made it.

Exit codes: 0 success, 1 usage error, 2 runtime failure (range guards,
caps, I/O).  Runtime failures print a one-line JSON object on stderr.
Set EXWALK_LOG=1 for timing diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

from .branching import (
    OffspringLaw,
    binomial_lower_tail,
    box_interior_edges,
    carne_bound,
    chernoff_bound,
    displacement_tail_check,
    run_branching,
    tiny_box_sweep,
)
from .exceptional import StopRule, estimate_En, line_x, run_exceptional
from .greedy import boundary_law_stats, returns_to_origin, run_greedy_path, unroll
from .lattice import (
    Edge,
    EdgeState,
    ExplicitFinite,
    FullLattice,
    LatticeError,
    RangeError,
    snapshot_string,
)
from .multi import PhaseStop, run_multiwalk
from .oracles import (
    decay_fit,
    escape_exponent,
    excursion_chain_En,
    gambler_exact,
    gambler_mc,
    local_time_exact,
    local_time_mc,
    seed_label,
    srw_transition_dp,
    teleport_F1F2,
)
from .stats import wilson_ci
from .words import StreamSeed

CONFIG_VERSION = "1"


@dataclass(frozen=True)
class RunConfig:
    """The flags that determine a run's data, in canonical form.

    Presentation flags (--out, --format) and scheduling flags (--jobs)
    are excluded: they must not change the report's rows, so they do not
    enter the hash.
    """

    subcommand: str
    params: dict
    seed: str

    def canonical_json(self) -> str:
        obj = {
            "params": self.params,
            "seed": self.seed,
            "subcommand": self.subcommand,
            "version": CONFIG_VERSION,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return str(v)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as f:
            f.write(text)


def _render(header: list, rows: list, config: RunConfig, fmt: str) -> str:
    if fmt == "json":
        payload = {
            "config": json.loads(config.canonical_json()),
            "config_hash": config.hash,
            "rows": [dict(zip(header, r)) for r in rows],
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"
    lines = [f"# config={config.hash}", ",".join(header)]
    lines.extend(",".join(_fmt(v) for v in r) for r in rows)
    return "\n".join(lines) + "\n"


REPORT_HEADER = [
    "name",
    "param",
    "trials",
    "estimate",
    "ci_lo",
    "ci_hi",
    "censored",
    "seed",
    "z",
]

EN_HEADER = [
    "n",
    "trials",
    "hits",
    "completions",
    "censored",
    "p_hat",
    "ci_lo",
    "ci_hi",
    "seed",
    "horizon",
]


def _report_rows(report) -> list:
    return [
        [
            r.name,
            r.param,
            r.trials,
            r.estimate,
            r.ci_lo,
            r.ci_hi,
            r.censored,
            r.seed,
            r.z,
        ]
        for r in report.rows
    ]


def _en_row(est) -> list:
    lo, hi = est.wilson_ci
    return [
        est.n,
        est.trials,
        est.hits,
        est.completions,
        est.censored,
        est.p_hat,
        lo,
        hi,
        seed_label(est.seed),
        est.horizon,
    ]


def _seed_from(args) -> StreamSeed:
    return StreamSeed(args.seed, getattr(args, "stream", 0) or 0)


def _parse_graph(spec: str):
    """Graph flag grammar: full:D | path:N | grid:N | comb:R.

    path:N is the N-site segment 0..N-1 on the x axis; grid:N the all
    Present N x N square centered at the origin (N odd); comb:R keeps
    every vertical edge of the [-R, R]^2 box but horizontal edges only
    on the x axis.
    """
    kind, _, arg = spec.partition(":")
    if kind == "full":
        return FullLattice(int(arg) if arg else 2)
    if kind == "path":
        n = int(arg)
        if n < 2:
            raise RangeError("path graph needs at least 2 sites")
        edges = {Edge((x,), 0): EdgeState.PRESENT for x in range(n - 1)}
        return ExplicitFinite(1, ((0, n - 1),), frozenset(edges))
    if kind == "grid":
        n = int(arg)
        if n < 2 or n % 2 == 0:
            raise RangeError("grid size must be odd and >= 3")
        r = n // 2
        box = ((-r, r), (-r, r))
        return ExplicitFinite(2, box, frozenset(box_interior_edges(2, box)))
    if kind == "comb":
        r = int(arg)
        if r < 1:
            raise RangeError("comb radius must be >= 1")
        box = ((-r, r), (-r, r))
        present = set()
        for x in range(-r, r + 1):
            for y in range(-r, r + 1):
                if y < r:
                    present.add(Edge((x, y), 1))
                if x < r and y == 0:
                    present.add(Edge((x, y), 0))
        return ExplicitFinite(2, box, frozenset(present))
    raise RangeError(f"unknown graph spec {spec!r}")


# ---------------------------------------------------------------------------
# subcommand runners: each returns (header, rows)


def _run_gambler(args, config):
    seed = _seed_from(args)
    report = gambler_mc(args.n, args.trials, seed)
    rows = _report_rows(report)
    exact = gambler_exact(args.n).value
    rows.append(["exact", str(args.n), 0, exact, exact, exact, 0, "", math.nan])
    return REPORT_HEADER, rows


def _run_localtime(args, config):
    seed = _seed_from(args)
    report = local_time_mc(args.n, args.trials, seed)
    rows = _report_rows(report)
    exact = local_time_exact(args.n)
    rows.append(["exact", str(args.n), 0, exact, exact, exact, 0, "", math.nan])
    return REPORT_HEADER, rows


def _run_greedy(args, config):
    seed = _seed_from(args)
    path, transcript = run_greedy_path(seed, args.letters)
    u = unroll(path, transcript)
    stats = boundary_law_stats(u)
    label = seed_label(seed)
    rows = []
    b = stats["boundary_visits"]
    lo, hi = wilson_ci(stats["outward_moves"], b)
    rows.append(
        [
            "boundary",
            "outward",
            b,
            stats["outward_moves"] / b if b else math.nan,
            lo,
            hi,
            0,
            label,
            math.nan,
        ]
    )
    inter = stats["interior_left"] + stats["interior_right"]
    lo, hi = wilson_ci(stats["interior_right"], inter)
    rows.append(
        [
            "interior",
            "rightward",
            inter,
            stats["interior_right"] / inter if inter else math.nan,
            lo,
            hi,
            0,
            label,
            math.nan,
        ]
    )
    ret = returns_to_origin(u)
    rows.append(
        ["returns", "origin", u.n_letters, float(ret), math.nan, math.nan, 0, label, math.nan]
    )
    return REPORT_HEADER, rows


def _run_exceptional(args, config):
    seed = _seed_from(args)
    stop = StopRule(max_stage=args.stage, max_letters=args.letters)
    _, env = run_exceptional(seed, stop, record=False, audit=False)
    if args.snapshot:
        states = env.materialize(env.default_box())
        with open(args.snapshot, "w", newline="\n") as f:
            f.write(snapshot_string(2, states))
    header = ["stage", "start_t", "end_t", "alpha", "tau"]
    rows = [
        [n, rec.start_t, rec.end_t, rec.alpha, env.tau[n]]
        for n, rec in enumerate(env.stage_history)
    ]
    return header, rows


def _run_en(args, config):
    seed = _seed_from(args)
    est = estimate_En(
        args.n, args.trials, seed, horizon_letters=args.horizon, jobs=args.jobs or 1
    )
    return EN_HEADER, [_en_row(est)]


def _run_en_oracle(args, config):
    seed = _seed_from(args)
    est = excursion_chain_En(args.n, args.trials, seed)
    return EN_HEADER, [_en_row(est)]


def _run_teleport(args, config):
    seed = _seed_from(args)
    rep = teleport_F1F2(args.n, args.trials, seed)
    label = seed_label(seed)
    rows = [
        [
            "teleport",
            "f1_fail",
            rep.trials,
            rep.p_f1c,
            rep.ci_f1c[0],
            rep.ci_f1c[1],
            0,
            label,
            math.nan,
        ],
        [
            "teleport",
            "f2_fail",
            rep.trials,
            rep.p_f2c,
            rep.ci_f2c[0],
            rep.ci_f2c[1],
            0,
            label,
            math.nan,
        ],
        [
            "teleport",
            "bound",
            rep.trials,
            rep.bound,
            math.nan,
            math.nan,
            0,
            label,
            math.nan,
        ],
    ]
    return REPORT_HEADER, rows


def _run_multi(args, config):
    seed = _seed_from(args)
    stop = PhaseStop(max_phase=args.phases, max_letters=args.letters)
    run = run_multiwalk(seed, args.k, stop, record=False, audit=False)
    if args.snapshot:
        states = run.env.materialize(run.env.default_box())
        with open(args.snapshot, "w", newline="\n") as f:
            f.write(snapshot_string(2, states))
    header = ["phase", "walk", "entry_t", "freeze_t"]
    rows = [[e.phase, e.walk, e.entry_t, e.freeze_t] for e in run.phase_log]
    return header, rows


def _run_branching(args, config):
    seed = _seed_from(args)
    law = OffspringLaw.reduced(args.eps)
    tree = run_branching(seed, args.d, law, args.horizon, args.cap, FullLattice(args.d))
    label = seed_label(seed)
    rows = [
        ["population", str(j), 1, float(nj), math.nan, math.nan, 0, label, math.nan]
        for j, nj in enumerate(tree.population)
    ]
    rows.append(
        [
            "tree",
            "truncated",
            1,
            1.0 if tree.truncated else 0.0,
            math.nan,
            math.nan,
            0,
            label,
            math.nan,
        ]
    )
    return REPORT_HEADER, rows


def _run_tinybox(args, config):
    seed = _seed_from(args)
    law = OffspringLaw.reduced(args.eps)
    certs = tiny_box_sweep(
        law,
        args.horizon,
        args.r,
        seed,
        particle_cap=args.cap,
        jobs=args.jobs,
    )
    header = ["subgraph_id", "edges_bitmask", "reachable", "certified", "witness", "horizon"]
    rows = [
        [c.subgraph_id, c.subgraph_id, c.reachable, c.certified, c.witness, c.horizon]
        for c in certs
    ]
    return header, rows


def _run_carne(args, config):
    graph = _parse_graph(args.graph)
    if isinstance(graph, FullLattice):
        raise RangeError("the transition bound check needs a finite graph")
    sites = [s for s in graph.sites_in_box() if graph.degree(s) > 0]
    header = ["name", "t", "max_ratio", "max_prob", "bound_at_max"]
    rows = []
    worst = 0.0
    for t in range(1, args.tmax + 1):
        best = (0.0, 0.0, math.inf)
        for x in sites:
            dp = srw_transition_dp(graph, x, t)
            for y, p in dp.items():
                if p <= 0.0:
                    continue
                b = carne_bound(graph, x, y, t)
                ratio = p / b
                if ratio > best[0]:
                    best = (ratio, p, b)
        rows.append(["carne", t, best[0], best[1], best[2]])
        worst = max(worst, best[0])
    rows.append(["carne", "max", worst, math.nan, math.nan])
    return header, rows


def _run_chernoff(args, config):
    bound = chernoff_bound(args.n, args.p, args.eps)
    k = math.floor(args.n * args.p * (1 - args.eps))
    exact = float(binomial_lower_tail(args.n, Fraction(args.p).limit_denominator(10**9), k))
    rows = [
        ["chernoff", "bound", 0, bound, math.nan, math.nan, 0, "", math.nan],
        ["chernoff", f"exact_tail_k={k}", 0, exact, math.nan, math.nan, 0, "", math.nan],
    ]
    return REPORT_HEADER, rows


def _run_displacement(args, config):
    seed = _seed_from(args)
    graph = _parse_graph(args.graph)
    rep = displacement_tail_check(graph, args.delta, args.n, args.trials, seed)
    label = seed_label(seed)
    rows = [
        [
            "displacement",
            "empirical",
            rep.trials,
            rep.empirical,
            math.nan,
            math.nan,
            0,
            label,
            math.nan,
        ],
        ["displacement", "bound", rep.trials, rep.bound, math.nan, math.nan, 0, label, math.nan],
    ]
    return REPORT_HEADER, rows


def _run_fit(args, config):
    seed = _seed_from(args)
    ests = [
        estimate_En(
            n,
            args.trials,
            seed.substream(n * (1 << 32)),
            horizon_letters=args.horizon,
            jobs=args.jobs or 1,
        )
        for n in range(args.n_lo, args.n_hi + 1)
    ]
    fit = decay_fit(ests)
    label = seed_label(seed)
    rows = [
        [
            "en",
            str(e.n),
            e.trials,
            e.p_hat,
            e.wilson_ci[0],
            e.wilson_ci[1],
            e.censored,
            label,
            math.nan,
        ]
        for e in ests
    ]
    rows.append(
        ["fit", "slope", 0, fit.slope, fit.slope_ci[0], fit.slope_ci[1], 0, label, math.nan]
    )
    rows.append(["fit", "rate", 0, fit.rate, math.nan, math.nan, 0, label, math.nan])
    return REPORT_HEADER, rows


def _run_escape(args, config):
    seed = _seed_from(args)
    transcript, _ = run_exceptional(seed, StopRule(max_letters=args.letters))
    fit = escape_exponent(transcript)
    label = seed_label(seed)
    rows = [
        ["escape", "alpha", 1, fit.alpha, fit.ci[0], fit.ci[1], 0, label, math.nan],
    ]
    return REPORT_HEADER, rows


_RUNNERS = {
    "gambler": _run_gambler,
    "localtime": _run_localtime,
    "greedy": _run_greedy,
    "exceptional": _run_exceptional,
    "en": _run_en,
    "en-oracle": _run_en_oracle,
    "teleport": _run_teleport,
    "multi": _run_multi,
    "branching": _run_branching,
    "tinybox": _run_tinybox,
    "carne": _run_carne,
    "chernoff": _run_chernoff,
    "displacement": _run_displacement,
    "fit": _run_fit,
    "escape": _run_escape,
}

#: Flags excluded from RunConfig (presentation and scheduling only).
_NON_DATA_FLAGS = {"out", "format", "jobs", "func"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="exwalk",
        description="Induced-walk experiments: every subcommand reruns one "
        "estimator deterministically from explicit flags.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, seeded=True, trials=None):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument(
            "--format", choices=("csv", "json"), default="csv", help="output format"
        )
        if seeded:
            sp.add_argument("--seed", type=int, required=True, help="master seed")
            sp.add_argument("--stream", type=int, default=0, help="stream id")
        if trials is not None:
            sp.add_argument(
                "--trials", type=int, default=trials, help="Monte Carlo trials"
            )
        return sp

    sp = add("gambler", "hitting probability of the far end of {0..n} from 1", trials=100_000)
    sp.add_argument("--n", type=int, required=True, help="interval length")

    sp = add("localtime", "expected origin visits of an N-step bridge-free walk", trials=100_000)
    sp.add_argument("--n", type=int, required=True, help="walk length N")

    sp = add("greedy", "self-growing path walk: boundary/interior step law")
    sp.add_argument("--letters", type=int, default=100_000, help="letters to consume")

    sp = add("exceptional", "staged corridor construction: stage table")
    sp.add_argument("--stage", type=int, help="stages to complete")
    sp.add_argument("--letters", type=int, help="letter cap")
    sp.add_argument("--snapshot", help="also write an edge snapshot here")

    sp = add("en", "back-crossing probability at line n (lattice run)", trials=1000)
    sp.add_argument("--n", type=int, required=True, help="line index")
    sp.add_argument("--horizon", type=int, help="letter horizon per trial")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    sp = add("en-oracle", "back-crossing probability from the excursion chain", trials=1000)
    sp.add_argument("--n", type=int, required=True, help="line index")

    sp = add("teleport", "restarting-chain failure frequencies and union bound", trials=1000)
    sp.add_argument("--n", type=int, required=True, help="line index")

    sp = add("multi", "round-robin walk team: per-phase entry/freeze table")
    sp.add_argument("--k", type=int, required=True, help="number of walks")
    sp.add_argument("--phases", type=int, help="construction phases to run")
    sp.add_argument("--letters", type=int, help="total letter cap")
    sp.add_argument("--snapshot", help="also write an edge snapshot here")

    sp = add("branching", "branching walk population trajectory on the free lattice")
    sp.add_argument("--d", type=int, default=2, help="dimension")
    sp.add_argument("--eps", type=float, required=True, help="extra-child probability")
    sp.add_argument("--horizon", type=int, required=True, help="time steps")
    sp.add_argument("--cap", type=int, default=100_000, help="particle cap")

    sp = add("tinybox", "recurrence certificates for all subgraphs of [-1,1]^2")
    sp.add_argument("--eps", type=float, required=True, help="extra-child probability")
    sp.add_argument("--horizon", type=int, required=True, help="time steps")
    sp.add_argument("--r", type=int, required=True, help="required visits per site")
    sp.add_argument("--cap", type=int, default=100_000, help="particle cap")
    sp.add_argument("--jobs", type=int, help="worker processes")

    sp = add("carne", "transition probabilities vs the degree/distance bound", seeded=False)
    sp.add_argument("--graph", required=True, help="path:N | grid:N | comb:R")
    sp.add_argument("--tmax", type=int, default=50, help="largest time checked")

    sp = add("chernoff", "binomial lower-tail bound and the exact tail", seeded=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)

    sp = add("displacement", "escape-distance tail vs the explicit bound", trials=10_000)
    sp.add_argument("--graph", default="full:2", help="full:D | path:N | grid:N | comb:R")
    sp.add_argument("--delta", type=float, required=True, help="radius fraction")
    sp.add_argument("--n", type=int, required=True, help="walk length")

    sp = add("fit", "back-crossing decay curve and fitted log-slope", trials=1000)
    sp.add_argument("--n-lo", type=int, required=True, help="first line index")
    sp.add_argument("--n-hi", type=int, required=True, help="last line index")
    sp.add_argument("--horizon", type=int, help="letter horizon per trial")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    sp = add("escape", "max-displacement growth exponent of the corridor walk")
    sp.add_argument("--letters", type=int, default=200_000, help="letters to consume")

    return p


def _config_from(args) -> RunConfig:
    params = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in _NON_DATA_FLAGS and k not in ("subcommand", "seed", "stream") and v is not None
    }
    seed = ""
    if hasattr(args, "seed"):
        seed = seed_label(StreamSeed(args.seed, getattr(args, "stream", 0) or 0))
    return RunConfig(subcommand=args.subcommand, params=params, seed=seed)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; 0 is --help
        return 0 if e.code == 0 else 1
    config = _config_from(args)
    t0 = time.perf_counter()
    try:
        header, rows = _RUNNERS[args.subcommand](args, config)
        text = _render(header, rows, config, args.format)
        _emit(text, args.out)
    except (LatticeError, OverflowError, ValueError, OSError) as e:
        sys.stderr.write(
            json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n"
        )
        return 2
    if os.environ.get("EXWALK_LOG"):
        sys.stderr.write(
            f"[exwalk] {args.subcommand} config={config.hash} "
            f"rows={len(rows)} secs={time.perf_counter() - t0:.3f}\n"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
