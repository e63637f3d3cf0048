"""Walks that only step along Present edges, and the adaptive environments
built to trap them.

The package provides the induced-walk core (lattice edges, letter streams,
transcripts), the staged corridor environment with its back-crossing
estimates, a greedy path environment, round-robin multi-walk construction,
branching random walks with recurrence certificates, and closed-form or
independently simulated cross-checks for each estimate.
"""

from __future__ import annotations

from .lattice import (
    COORD_BOUND,
    CoordinateOverflowError,
    Direction,
    Edge,
    EdgeState,
    ExplicitFinite,
    FullLattice,
    LatticeError,
    RangeError,
    UnrevealedEdgeError,
    canonical_edge,
    direction_from_code,
    directions,
    explicit_from_states,
    load_edges,
    neighbor,
    reachable_sites,
    save_edges,
    snapshot_string,
)
from .words import LetterStream, StreamSeed, derive_key, letter_codes, mix64, word_at
from .walk import WalkState, WalkTranscript, induced_step, replay_letters, run_induced
from .stats import EnEstimate, normal_ci, wilson_ci
from .exceptional import (
    Excursion,
    ExcursionOutcome,
    ExceptionalEngine,
    ExceptionalEnv,
    MissingTauError,
    StageRecord,
    StopRule,
    boundary_event_counts,
    default_en_horizon,
    estimate_En,
    excursion_decompose,
    interior_step_counts,
    line_visit_profile,
    line_x,
    resolve_edge,
    run_exceptional,
)
from .greedy import (
    GreedyPath,
    PathMismatchError,
    UnrolledTranscript,
    boundary_law_simulate,
    boundary_law_stats,
    returns_to_origin,
    run_greedy_path,
    unroll,
)
from .multi import (
    MultiWalkEngine,
    MultiWalkRun,
    PhaseLogEntry,
    PhaseStop,
    default_eni_horizon,
    eni_decay_profile,
    estimate_Eni,
    run_multiwalk,
)
from .branching import (
    DisconnectedPairError,
    DisplacementReport,
    OffspringLaw,
    ParticleRecord,
    ParticleTree,
    PopulationCapError,
    RecurrenceCertificate,
    binomial_lower_tail,
    box_interior_edges,
    carne_bound,
    certify_branching,
    chernoff_bound,
    displacement_tail_check,
    gw_population,
    recurrence_certificate,
    run_branching,
    tiny_box_sweep,
)
from .oracles import (
    DecayFit,
    EscapeFit,
    ExperimentReport,
    InsufficientPointsError,
    ReportRow,
    TeleportReport,
    decay_fit,
    escape_exponent,
    excursion_chain_En,
    gambler_exact,
    gambler_mc,
    local_time_closed_form,
    local_time_exact,
    local_time_mc,
    srw_transition_dp,
    teleport_F1F2,
    transition_dp,
)

__version__ = "0.1.0"
