"""Implementability checking for multiparty protocols.

A *global type* describes a protocol among message-passing roles.  This
package parses global types, projects each role onto a deterministic
finite-state machine by subset construction, and decides whether the
resulting machines implement the protocol — meaning their asynchronous
executions over reliable FIFO channels produce exactly the protocol's
traces, no deadlocks, no extra behaviour.  When the answer is no, it
produces a concrete counterexample trace.

Entry points:

- :func:`parse_global_type`, :func:`validate_well_formedness` — syntax.
- :func:`subset_construction`, :func:`build_projections` — per-role machines.
- :func:`check_implementability` — the decision procedure.
- :func:`explore`, :func:`replay_trace` — execute machines over FIFO channels.
- :func:`bounded_fidelity_check` — independent bounded verification oracle.
"""
from .automata import (
    AsyncEvent,
    Direction,
    LocalNfa,
    SyncAutomaton,
    SyncEvent,
    build_gaut,
    erase,
    erase_label,
    format_trace,
    nfa_to_dot,
    parse_trace,
    project_word,
    receive,
    send,
    split_event,
    split_word,
    sync_to_dot,
)
from .csm import (
    Csm,
    CsmConfiguration,
    ExplorationReport,
    NotEnabled,
    StepFailure,
    check_channel_compliance,
    csm_step,
    enabled_events,
    explore,
    initial_configuration,
    is_final,
    replay_trace,
)
from .oracle import (
    BudgetExhausted,
    FidelityReport,
    RunPrefix,
    bounded_fidelity_check,
    generate_gk,
    indistinguishable_finite,
    intersection_witness,
)
from .projection import (
    SubsetMachine,
    SubsetState,
    bounded_local_language_check,
    build_projections,
    determinize,
    epsilon_closure,
    machine_to_dot,
    subset_construction,
)
from .syntax import (
    Branch,
    Choice,
    End,
    END,
    GlobalType,
    Message,
    ParseError,
    Rec,
    Role,
    Var,
    WellFormednessReport,
    WellFormednessRule,
    WellFormednessViolation,
    exchange,
    measure_size,
    messages_of,
    parse_global_type,
    pretty,
    pretty_inline,
    roles_of,
    subterms,
    validate_well_formedness,
)
from .validity import (
    AvailableMessageQuery,
    AvailableMessageResult,
    IllFormedProtocolError,
    InternalError,
    ReceiveViolationDetails,
    SendViolationDetails,
    ValidityViolation,
    Verdict,
    ViolationKind,
    available_messages,
    build_counterexample,
    check_implementability,
    check_no_mixed_choice,
    check_receive_validity,
    check_send_validity,
    transition_origins_destinations,
)

__version__ = "0.1.0"

__all__ = [
    "AsyncEvent",
    "AvailableMessageQuery",
    "AvailableMessageResult",
    "Branch",
    "BudgetExhausted",
    "Choice",
    "Csm",
    "CsmConfiguration",
    "Direction",
    "END",
    "End",
    "ExplorationReport",
    "FidelityReport",
    "GlobalType",
    "IllFormedProtocolError",
    "InternalError",
    "LocalNfa",
    "Message",
    "NotEnabled",
    "ParseError",
    "Rec",
    "ReceiveViolationDetails",
    "Role",
    "RunPrefix",
    "SendViolationDetails",
    "StepFailure",
    "SubsetMachine",
    "SubsetState",
    "SyncAutomaton",
    "SyncEvent",
    "ValidityViolation",
    "Var",
    "Verdict",
    "ViolationKind",
    "WellFormednessReport",
    "WellFormednessRule",
    "WellFormednessViolation",
    "available_messages",
    "bounded_fidelity_check",
    "bounded_local_language_check",
    "build_counterexample",
    "build_gaut",
    "build_projections",
    "check_channel_compliance",
    "check_implementability",
    "check_no_mixed_choice",
    "check_receive_validity",
    "check_send_validity",
    "csm_step",
    "determinize",
    "enabled_events",
    "epsilon_closure",
    "erase",
    "erase_label",
    "exchange",
    "explore",
    "format_trace",
    "generate_gk",
    "indistinguishable_finite",
    "initial_configuration",
    "intersection_witness",
    "is_final",
    "machine_to_dot",
    "measure_size",
    "messages_of",
    "nfa_to_dot",
    "parse_global_type",
    "parse_trace",
    "pretty",
    "pretty_inline",
    "project_word",
    "receive",
    "replay_trace",
    "roles_of",
    "send",
    "split_event",
    "split_word",
    "subset_construction",
    "subterms",
    "sync_to_dot",
    "transition_origins_destinations",
    "validate_well_formedness",
]
