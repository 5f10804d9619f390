"""The implementability decision: send and receive validity.

A protocol is implementable exactly when, for every role, the deterministic
machine built by subset construction satisfies two conditions:

* **send validity** — whenever a state takes a send transition, *every*
  member subterm of that state can perform that send (via some path whose
  only other steps are silent for the role).  Otherwise the role could
  commit to a send that part of the protocol never allows, and
  :func:`build_counterexample` turns the unable member into a concrete bad
  execution.

* **receive validity** — whenever a state can receive from two *different*
  senders, taking the second receive must not leave the first sender's
  message available: otherwise both messages can be in flight at once and
  the role may consume them in an order the protocol cannot explain.
  Availability is computed by :func:`available_messages`, a syntactic
  analysis of which sends can "bubble up" to the front of a subterm while a
  set of roles stands still.

Both checks are sound and complete, so a violation always yields a real
counterexample trace, verified against the machine semantics before it is
returned.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping, Optional

from .automata import (
    AsyncEvent,
    Direction,
    Edge,
    LocalNfa,
    SyncAutomaton,
    SyncEvent,
    receive,
    send,
    split_word,
)
from .csm import Csm, NotEnabled, replay_trace
from .oracle import intersection_witness
from .projection import (
    SubsetMachine,
    SubsetState,
    build_projections,
)
from .syntax import (
    Choice,
    GlobalType,
    Rec,
    Role,
    Var,
    binders,
    pretty_inline,
    roles_of,
    subterms,
    validate_well_formedness,
    WellFormednessReport,
)

__all__ = [
    "MachineTransition",
    "transition_origins_destinations",
    "AvailableMessageQuery",
    "AvailableMessageResult",
    "available_messages",
    "ViolationKind",
    "SendViolationDetails",
    "ReceiveViolationDetails",
    "ValidityViolation",
    "check_send_validity",
    "check_receive_validity",
    "check_no_mixed_choice",
    "IllFormedProtocolError",
    "InternalError",
    "Verdict",
    "check_implementability",
    "build_counterexample",
]


#: A deterministic-machine transition: (source, event, target).
MachineTransition = tuple[SubsetState, AsyncEvent, SubsetState]


class InternalError(RuntimeError):
    """A should-be-impossible situation: an invariant the checks rely on
    failed to hold.  Indicates a bug, never bad user input."""


class IllFormedProtocolError(ValueError):
    """Raised when an operation that requires a well-formed protocol is
    handed one that is not; carries the full report."""

    def __init__(self, report: WellFormednessReport) -> None:
        lines = "; ".join(v.message for v in report.violations)
        super().__init__(f"protocol is not well-formed: {lines}")
        self.report = report


# --------------------------------------------------------------------------- #
# Transition origins and destinations
# --------------------------------------------------------------------------- #


def transition_origins_destinations(
    m: SubsetMachine, nfa: LocalNfa, t: MachineTransition
) -> tuple[frozenset[GlobalType], frozenset[GlobalType]]:
    """For machine transition ``s --x--> s'``: which members of ``s`` can
    perform ``x`` (origins), and which members of ``s'`` are reachable by
    doing so (destinations).

    A member ``G`` is an origin when some path from ``G`` spells exactly
    ``x`` — silent steps may occur before as well as after the labeled step.
    Destinations are the endpoints of all such paths; by construction they
    form exactly the successor state's member set.
    """
    s, x, s2 = t
    if m.step(s, x) != s2:
        raise ValueError(f"{s} --{x}--> {s2} is not a transition of the machine")
    origins: list[GlobalType] = []
    landing: set[GlobalType] = set()
    for member in s:
        hit = False
        for node in nfa.eps_closure_of(member):
            for _, label, tgt in nfa.out(node):
                if label == x:
                    hit = True
                    landing.add(tgt)
        if hit:
            origins.append(member)
    destinations: set[GlobalType] = set()
    for node in landing:
        destinations.update(nfa.eps_closure_of(node))
    return frozenset(origins), frozenset(destinations)


# --------------------------------------------------------------------------- #
# Available messages
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, slots=True)
class AvailableMessageQuery:
    """Ask which sends can reach the front of ``subterm``'s execution while
    the ``blocked`` roles perform nothing.  ``unfolded`` lists recursion
    variables already unfolded (used by the recursion itself; queries
    normally leave it empty)."""

    subterm: GlobalType
    blocked: frozenset[Role]
    unfolded: frozenset[str] = frozenset()


@dataclass(frozen=True)
class AvailableMessageResult:
    """The available send events, each with a witness: a chained sequence of
    synchronous-automaton transitions from the queried subterm whose last
    transition is the exchange producing the event."""

    events: frozenset[AsyncEvent]
    witness: Mapping[AsyncEvent, tuple[Edge, ...]]


def available_messages(
    g_root: GlobalType, q: AvailableMessageQuery
) -> AvailableMessageResult:
    """Compute the messages available at a subterm of ``g_root``.

    A send ``a>b!m`` is available when the protocol, starting at the
    subterm, can reach that exchange without any blocked role taking a step
    first — choices by a blocked sender freeze their receivers too (they
    would wait forever), and an earlier exchange on the same channel hides
    later sends on it.  Each recursion variable is unfolded at most once per
    path, which suffices because availability is not increased by a second
    pass through a loop.
    """
    universe = {node.intern_id for node in subterms(g_root)}
    if q.subterm.intern_id not in universe:
        raise InternalError("queried subterm does not occur in the protocol")
    bind = binders(g_root)
    memo: dict[tuple, dict[AsyncEvent, tuple[Edge, ...]]] = {}

    def walk(
        node: GlobalType, blocked: frozenset[Role], unfolded: frozenset[str]
    ) -> dict[AsyncEvent, tuple[Edge, ...]]:
        key = (node.intern_id, blocked, unfolded)
        cached = memo.get(key)
        if cached is not None:
            return cached
        table: dict[AsyncEvent, tuple[Edge, ...]] = {}
        if isinstance(node, Rec):
            inner = walk(node.body, blocked, unfolded | {node.var})
            step: Edge = (node, None, node.body)
            table = {ev: (step,) + sfx for ev, sfx in inner.items()}
        elif isinstance(node, Var):
            if node.var not in unfolded:
                binder = bind[node.var]
                inner = walk(binder.body, blocked, unfolded | {node.var})
                hops: tuple[Edge, ...] = (
                    (node, None, binder),
                    (binder, None, binder.body),
                )
                table = {ev: hops + sfx for ev, sfx in inner.items()}
        elif isinstance(node, Choice):
            if node.sender not in blocked:
                for b in node.branches:
                    step = (
                        node,
                        SyncEvent(node.sender, b.receiver, b.message),
                        b.continuation,
                    )
                    inner = walk(b.continuation, blocked, unfolded)
                    for ev, sfx in inner.items():
                        if ev.active == node.sender and ev.peer == b.receiver:
                            # The branch exchange itself is the first message
                            # on this channel; later sends on it are hidden.
                            continue
                        table.setdefault(ev, (step,) + sfx)
                    head = send(node.sender, b.receiver, b.message)
                    table.setdefault(head, (step,))
            else:
                for b in node.branches:
                    step = (
                        node,
                        SyncEvent(node.sender, b.receiver, b.message),
                        b.continuation,
                    )
                    inner = walk(b.continuation, blocked | {b.receiver}, unfolded)
                    for ev, sfx in inner.items():
                        table.setdefault(ev, (step,) + sfx)
        memo[key] = table
        return table

    table = walk(q.subterm, q.blocked, q.unfolded)
    return AvailableMessageResult(frozenset(table), dict(table))


# --------------------------------------------------------------------------- #
# Violations
# --------------------------------------------------------------------------- #


class ViolationKind(Enum):
    SEND_VALIDITY = "SendValidity"
    RECEIVE_VALIDITY = "ReceiveValidity"


@dataclass(frozen=True)
class SendViolationDetails:
    """A send transition some members of its source state cannot perform."""

    transition: MachineTransition
    missing: tuple[GlobalType, ...]  # members of the source state unable to send


@dataclass(frozen=True)
class ReceiveViolationDetails:
    """Two receives from different senders where taking the second leaves
    the first sender's message available."""

    transition_one: MachineTransition  # the receive whose message stays available
    transition_two: MachineTransition  # the receive that was taken
    witness_subterm: GlobalType  # destination subterm where it stays available
    offending_event: AsyncEvent  # the still-available send
    witness_suffix: tuple[Edge, ...]  # how it becomes available from there


@dataclass(frozen=True)
class ValidityViolation:
    """One failed validity condition at one machine state."""

    kind: ViolationKind
    role: Role
    state: SubsetState
    details: object

    def describe(self) -> str:
        if self.kind is ViolationKind.SEND_VALIDITY:
            d: SendViolationDetails = self.details  # type: ignore[assignment]
            _, event, _ = d.transition
            unable = ", ".join(pretty_inline(m) for m in d.missing)
            return (
                f"send validity fails for role {self.role}: transition {event} "
                f"at state {self.state} is impossible for member(s): {unable}"
            )
        d2: ReceiveViolationDetails = self.details  # type: ignore[assignment]
        _, first, _ = d2.transition_one
        _, second, _ = d2.transition_two
        return (
            f"receive validity fails for role {self.role}: at state {self.state}, "
            f"after {second} the message of {first} is still available "
            f"({d2.offending_event} at {pretty_inline(d2.witness_subterm)})"
        )


def _send_violations(
    m: SubsetMachine, nfa: LocalNfa
) -> Iterator[ValidityViolation]:
    for state in m.states:
        for event, target in m.out(state):
            if event.direction is not Direction.SEND:
                continue
            origins, _ = transition_origins_destinations(m, nfa, (state, event, target))
            if len(origins) != len(state):
                missing = tuple(
                    sorted(
                        (g for g in state if g not in origins),
                        key=lambda g: g.intern_id,
                    )
                )
                yield ValidityViolation(
                    ViolationKind.SEND_VALIDITY,
                    m.role,
                    state,
                    SendViolationDetails((state, event, target), missing),
                )


def check_send_validity(m: SubsetMachine, nfa: LocalNfa) -> Optional[ValidityViolation]:
    """First send-validity violation in scan order (states in discovery
    order, transitions in label order), or ``None``."""
    return next(_send_violations(m, nfa), None)


def _receive_violations(
    m: SubsetMachine, nfa: LocalNfa, g: GlobalType
) -> Iterator[ValidityViolation]:
    available_cache: dict[int, AvailableMessageResult] = {}

    def available_at(subterm: GlobalType) -> AvailableMessageResult:
        cached = available_cache.get(subterm.intern_id)
        if cached is None:
            cached = available_messages(
                g, AvailableMessageQuery(subterm, frozenset((m.role,)))
            )
            available_cache[subterm.intern_id] = cached
        return cached

    for state in m.states:
        receives = [
            (event, target)
            for event, target in m.out(state)
            if event.direction is Direction.RECEIVE
        ]
        for first, target_one in receives:
            for second, target_two in receives:
                if first.peer == second.peer:
                    continue
                _, destinations = transition_origins_destinations(
                    m, nfa, (state, second, target_two)
                )
                offending = send(first.peer, m.role, first.message)
                for witness in sorted(destinations, key=lambda g2: g2.intern_id):
                    result = available_at(witness)
                    if offending in result.events:
                        yield ValidityViolation(
                            ViolationKind.RECEIVE_VALIDITY,
                            m.role,
                            state,
                            ReceiveViolationDetails(
                                (state, first, target_one),
                                (state, second, target_two),
                                witness,
                                offending,
                                result.witness[offending],
                            ),
                        )
                        break  # one witness per transition pair is enough


def check_receive_validity(
    m: SubsetMachine, nfa: LocalNfa, g: GlobalType
) -> Optional[ValidityViolation]:
    """First receive-validity violation in scan order, or ``None``.

    Only pairs of receives from *different* senders are constrained: same-
    sender alternatives arrive on one FIFO channel and cannot race.
    """
    return next(_receive_violations(m, nfa, g), None)


def check_no_mixed_choice(m: SubsetMachine) -> bool:
    """True when no state of the machine offers both a send and a receive.

    Machines of implementable protocols are never mixed; a projectable
    protocol in the classical, syntactic sense additionally never *shares*
    a state between different peers, but mixedness is the part that matters
    for comparing against classical projection.
    """
    for state in m.states:
        directions = {event.direction for event, _ in m.out(state)}
        if len(directions) > 1:
            return False
    return True


# --------------------------------------------------------------------------- #
# The decision procedure
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Verdict:
    """Outcome of :func:`check_implementability`.

    ``projections`` is present exactly when the protocol is implementable;
    ``violation``/``counterexample`` exactly when it is not.  ``violations``
    collects every violation found (more than one only when requested).
    """

    implementable: bool
    projections: Optional[dict[Role, SubsetMachine]]
    violation: Optional[ValidityViolation]
    counterexample: Optional[tuple[AsyncEvent, ...]]
    violations: tuple[ValidityViolation, ...] = ()


def check_implementability(
    g: GlobalType,
    *,
    all_violations: bool = False,
    _projections: Optional[
        tuple[SyncAutomaton, dict[Role, tuple[LocalNfa, SubsetMachine]]]
    ] = None,
) -> Verdict:
    """Decide whether ``g`` is implementable.

    Scans roles in first-occurrence order, checking send validity then
    receive validity per role, and stops at the first violation unless
    ``all_violations`` is set.  A violation is returned together with a
    verified counterexample trace.  Raises :class:`IllFormedProtocolError`
    when ``g`` breaks the structural rules.
    """
    report = validate_well_formedness(g)
    if not report.ok:
        raise IllFormedProtocolError(report)
    a, table = _projections if _projections is not None else build_projections(g)
    found: list[ValidityViolation] = []
    for role in roles_of(g):
        nfa, machine = table[role]
        if all_violations:
            found.extend(_send_violations(machine, nfa))
            found.extend(_receive_violations(machine, nfa, g))
        else:
            violation = check_send_validity(machine, nfa) or check_receive_validity(
                machine, nfa, g
            )
            if violation is not None:
                found.append(violation)
                break
    if not found:
        return Verdict(
            implementable=True,
            projections={role: machine for role, (_, machine) in table.items()},
            violation=None,
            counterexample=None,
        )
    first = found[0]
    counterexample = build_counterexample(g, first, _projections=(a, table))
    return Verdict(
        implementable=False,
        projections=None,
        violation=first,
        counterexample=counterexample,
        violations=tuple(found),
    )


# --------------------------------------------------------------------------- #
# Counterexamples
# --------------------------------------------------------------------------- #


def _product_search(
    a: SyncAutomaton,
    m: SubsetMachine,
    goal_nodes: frozenset[GlobalType],
    goal_state: SubsetState,
) -> tuple[Edge, ...]:
    """Shortest protocol path from the root to a node in ``goal_nodes``
    along which the role's machine lands exactly in ``goal_state``."""
    from .automata import erase_label

    start = (a.initial, m.initial)
    if a.initial in goal_nodes and m.initial == goal_state:
        return ()
    parents: dict[tuple, tuple[tuple, Edge]] = {}
    seen = {start}
    queue = deque((start,))
    while queue:
        node = queue.popleft()
        g_state, m_state = node
        for edge in a.out(g_state):
            _, label, tgt = edge
            if label is None:
                nxt_m = m_state
            else:
                local = erase_label(label, m.role)
                if local is None:
                    nxt_m = m_state
                else:
                    stepped = m.step(m_state, local)
                    if stepped is None:
                        continue
                    nxt_m = stepped
            successor = (tgt, nxt_m)
            if successor in seen:
                continue
            seen.add(successor)
            parents[successor] = (node, edge)
            if tgt in goal_nodes and nxt_m == goal_state:
                edges: list[Edge] = []
                at = successor
                while at in parents:
                    at, e = parents[at]
                    edges.append(e)
                edges.reverse()
                return tuple(edges)
            queue.append(successor)
    raise InternalError("no protocol path realizes the violating state")


def _silent_path(nfa: LocalNfa, source: GlobalType, target: GlobalType) -> tuple[Edge, ...]:
    """Shortest path of role-silent transitions from ``source`` to
    ``target`` (empty when equal), with the original exchange labels."""
    if source == target:
        return ()
    parents: dict[GlobalType, tuple[GlobalType, Edge]] = {}
    seen = {source}
    queue = deque((source,))
    while queue:
        node = queue.popleft()
        for src, local, tgt in nfa.out(node):
            if local is not None or tgt in seen:
                continue
            seen.add(tgt)
            parents[tgt] = (node, (src, local, tgt))
            if tgt == target:
                edges: list[Edge] = []
                at = tgt
                while at in parents:
                    at, e = parents[at]
                    edges.append(e)
                edges.reverse()
                return tuple(edges)
            queue.append(tgt)
    raise InternalError("witness subterm is not silently reachable")


def build_counterexample(
    g: GlobalType,
    v: ValidityViolation,
    *,
    _projections: Optional[
        tuple[SyncAutomaton, dict[Role, tuple[LocalNfa, SubsetMachine]]]
    ] = None,
) -> tuple[AsyncEvent, ...]:
    """Turn a validity violation into a concrete bad execution.

    The returned trace executes in the machine system yet is consistent
    with no run of the protocol; both facts are re-verified against the
    semantics before returning (an :class:`InternalError` would indicate a
    bug in the checks, not bad input).

    For a send violation: drive the protocol to a run that reaches a member
    unable to send while the role's machine sits in the violating state,
    then fire the send.  For a receive violation: reach the violating state
    along a run whose next exchange is the second receive's message, put
    that message in flight, let the still-available first message bubble up
    (skipping steps of roles that are frozen behind the role under test),
    and then receive the first message ahead of the second.
    """
    a, table = _projections if _projections is not None else build_projections(g)
    nfa, machine = table[v.role]

    if v.kind is ViolationKind.SEND_VALIDITY:
        details: SendViolationDetails = v.details  # type: ignore[assignment]
        state, event, _ = details.transition
        alpha = _product_search(a, machine, frozenset(details.missing), state)
        trace = split_word(e[1] for e in alpha if e[1] is not None) + (event,)
    else:
        d: ReceiveViolationDetails = v.details  # type: ignore[assignment]
        state = v.state
        _, first, _ = d.transition_one
        _, second, _ = d.transition_two
        wanted = SyncEvent(second.peer, v.role, second.message)
        origin = landing = None
        for member in state:
            closure = sorted(nfa.eps_closure_of(member), key=lambda n: n.intern_id)
            for node in closure:
                for _, label, tgt in nfa.out(node):
                    if label == second and d.witness_subterm in nfa.eps_closure_of(tgt):
                        origin, landing = node, tgt
                        break
                if origin is not None:
                    break
            if origin is not None:
                break
        if origin is None:
            raise InternalError("second receive has no matching protocol exchange")
        alpha = _product_search(a, machine, frozenset((origin,)), state)
        events: list[AsyncEvent] = list(split_word(e[1] for e in alpha if e[1] is not None))
        events.append(send(wanted.sender, wanted.receiver, wanted.message))
        for _, label, _ in _silent_path(nfa, landing, d.witness_subterm):
            if label is not None:
                events.extend(
                    (
                        send(label.sender, label.receiver, label.message),
                        receive(label.receiver, label.sender, label.message),
                    )
                )
        # Replay the witness suffix, dropping steps of roles frozen behind
        # the role under test: a frozen sender's exchange freezes its
        # receiver too; a frozen receiver still lets the send go out.
        frozen = {v.role}
        for _, label, _ in d.witness_suffix[:-1]:
            if label is None:
                continue
            if label.sender in frozen:
                frozen.add(label.receiver)
                continue
            events.append(send(label.sender, label.receiver, label.message))
            if label.receiver not in frozen:
                events.append(receive(label.receiver, label.sender, label.message))
        final = d.witness_suffix[-1][1]
        if final != SyncEvent(first.peer, v.role, first.message):
            raise InternalError("witness suffix does not end at the available send")
        events.append(send(first.peer, v.role, first.message))
        events.append(receive(v.role, first.peer, first.message))
        trace = tuple(events)

    # Verify both halves of the claim against the semantics.
    system = Csm({role: machine for role, (_, machine) in table.items()})
    try:
        replay_trace(system, trace)
    except NotEnabled as exc:
        raise InternalError(f"counterexample does not execute: {exc}") from exc
    if intersection_witness(g, trace, automaton=a) is not None:
        raise InternalError("counterexample is consistent with a protocol run")
    return trace
