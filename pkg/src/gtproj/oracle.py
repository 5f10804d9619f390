"""Independent cross-checks for the projection pipeline.

Everything here re-derives semantic facts from first principles so the test
suite can compare the fast checks against ground truth:

* :func:`indistinguishable_finite` — are two asynchronous traces equal up to
  the reorderings that no participant can observe?
* :func:`intersection_witness` — is an asynchronous trace consistent with
  *some* run of the protocol (each role's view extends to that run's view)?
  Exact, by exhaustive product search.
* :func:`bounded_fidelity_check` — up to a depth bound: the machines replay
  every protocol run, accept no trace inconsistent with every run, and never
  deadlock.
* :func:`generate_gk` — a scalable family whose per-role machine provably
  needs exponentially many states, for stress-testing the construction.
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .automata import (
    AsyncEvent,
    Edge,
    SyncAutomaton,
    build_gaut,
    project_word,
    receive,
    send,
    split_event,
)
from .csm import Csm, NotEnabled, csm_step, enabled_events, explore, initial_configuration
from .syntax import (
    END,
    Branch,
    Choice,
    GlobalType,
    Message,
    Rec,
    Role,
    Var,
    exchange,
    roles_of,
)

__all__ = [
    "RunPrefix",
    "BudgetExhausted",
    "indistinguishable_finite",
    "intersection_witness",
    "FidelityReport",
    "bounded_fidelity_check",
    "generate_gk",
]


# --------------------------------------------------------------------------- #
# Run prefixes
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class RunPrefix:
    """A chained sequence of synchronous-automaton transitions starting at
    ``start``; its trace is the sequence of non-silent labels."""

    start: GlobalType
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        at = self.start
        for src, _, tgt in self.edges:
            if src != at:
                raise ValueError("run prefix edges do not chain")
            at = tgt

    def end(self) -> GlobalType:
        return self.edges[-1][2] if self.edges else self.start

    def trace(self):
        return tuple(label for _, label, _ in self.edges if label is not None)


# --------------------------------------------------------------------------- #
# Observational equivalence of traces
# --------------------------------------------------------------------------- #


class BudgetExhausted(Exception):
    """The swap search hit its budget before reaching an answer."""


def _swappable(prefix: tuple[AsyncEvent, ...], x: AsyncEvent, y: AsyncEvent) -> bool:
    """May adjacent events ``x y`` (after ``prefix``) be reordered without
    any role observing the difference?  Symmetric in ``x`` and ``y``."""
    if x.is_send and y.is_send:
        return x.active != y.active
    if not x.is_send and not y.is_send:
        return x.active != y.active
    snd, rcv = (x, y) if x.is_send else (y, x)
    if snd.active == rcv.peer and snd.peer == rcv.active:
        # Same channel: swappable only while the channel is non-empty, i.e.
        # the prefix holds strictly more sends than receives on it.
        sent = sum(
            1 for e in prefix if e.is_send and e.active == snd.active and e.peer == snd.peer
        )
        taken = sum(
            1
            for e in prefix
            if not e.is_send and e.active == rcv.active and e.peer == rcv.peer
        )
        return sent > taken
    return snd.active != rcv.active and (
        snd.active != rcv.peer or snd.peer != rcv.active
    )


def indistinguishable_finite(
    u: Iterable[AsyncEvent], v: Iterable[AsyncEvent], budget: int = 10_000
) -> bool:
    """Decide whether ``u`` and ``v`` are equal up to unobservable
    reorderings, by breadth-first search over adjacent swaps.

    Returns ``False`` immediately when a reordering is impossible (length,
    event multiset, or some role's own event order differs — swaps never
    reorder one role's events).  Raises :class:`BudgetExhausted` when the
    search would exceed ``budget`` generated words without an answer.
    """
    u = tuple(u)
    v = tuple(v)
    if u == v:
        return True
    if len(u) != len(v) or Counter(u) != Counter(v):
        return False
    for role in {e.active for e in u}:
        if project_word(u, role) != project_word(v, role):
            return False
    seen = {u}
    queue: deque[tuple[AsyncEvent, ...]] = deque((u,))
    generated = 0
    while queue:
        word = queue.popleft()
        for i in range(len(word) - 1):
            if not _swappable(word[:i], word[i], word[i + 1]):
                continue
            swapped = word[:i] + (word[i + 1], word[i]) + word[i + 2 :]
            if swapped in seen:
                continue
            if swapped == v:
                return True
            generated += 1
            if generated > budget:
                raise BudgetExhausted(
                    f"no answer within {budget} swap applications"
                )
            seen.add(swapped)
            queue.append(swapped)
    return False


# --------------------------------------------------------------------------- #
# Consistency of a trace with the protocol's runs
# --------------------------------------------------------------------------- #


def intersection_witness(
    g: GlobalType, w: Iterable[AsyncEvent], *, automaton: Optional[SyncAutomaton] = None
) -> Optional[RunPrefix]:
    """Search for a protocol run consistent with trace ``w``: a run prefix
    whose split trace extends every role's view of ``w``.

    Returns such a prefix, or ``None`` when no run of ``g`` is consistent
    with ``w``.  The search is exact: it explores the finite product of
    automaton states with per-role matched-prefix counters, and because
    every non-final automaton state has a successor, any consistent prefix
    extends to a maximal run — so ``None`` really means no maximal run
    matches.
    """
    a = automaton if automaton is not None else build_gaut(g)
    roles = roles_of(g)
    w = tuple(w)
    if any(e.active not in roles or e.peer not in roles for e in w):
        return None
    index = {r: i for i, r in enumerate(roles)}
    targets = tuple(project_word(w, r) for r in roles)
    goal = tuple(len(t) for t in targets)
    start = (a.initial, (0,) * len(roles))
    if goal == start[1]:
        return RunPrefix(a.initial, ())
    parents: dict[tuple, tuple[tuple, Edge]] = {}
    seen = {start}
    queue = deque((start,))

    def rebuild(node: tuple) -> RunPrefix:
        edges: list[Edge] = []
        while node in parents:
            node, edge = parents[node]
            edges.append(edge)
        edges.reverse()
        return RunPrefix(a.initial, tuple(edges))

    while queue:
        node = queue.popleft()
        state, counts = node
        for edge in a.out(state):
            _, label, tgt = edge
            if label is None:
                successor = (tgt, counts)
            else:
                nxt = list(counts)
                ok = True
                for event in split_event(label):
                    i = index[event.active]
                    want = targets[i]
                    if nxt[i] < len(want):
                        if want[nxt[i]] != event:
                            ok = False
                            break
                        nxt[i] += 1
                if not ok:
                    continue
                successor = (tgt, tuple(nxt))
            if successor in seen:
                continue
            seen.add(successor)
            parents[successor] = (node, edge)
            if successor[1] == goal:
                return rebuild(successor)
            queue.append(successor)
    return None


# --------------------------------------------------------------------------- #
# Bounded fidelity
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class FidelityReport:
    """Outcome of :func:`bounded_fidelity_check`.

    On failure, ``obligation`` names the broken obligation (``"replay"``,
    ``"intersection"``, or ``"deadlock"``) and ``witness`` is an offending
    trace.
    """

    ok: bool
    obligation: Optional[str]
    witness: Optional[tuple[AsyncEvent, ...]]
    run_prefixes_checked: int
    csm_traces_checked: int


def bounded_fidelity_check(
    g: GlobalType, c: Csm, depth: int = 14, *, channel_bound: int = 4
) -> FidelityReport:
    """Check, up to ``depth`` events, that the machines and the protocol
    agree:

    1. *replay* — the split trace of every protocol run prefix executes in
       the machine system;
    2. *intersection* — every trace the machine system can produce (under
       ``channel_bound``) is consistent with some protocol run;
    3. *deadlock* — the machine system reaches no deadlock.

    Returns the first failure with a witness trace.
    """
    a = build_gaut(g)

    # Obligation 1: protocol runs replay in the machine system.
    replayed = 0
    seen_replay: set[tuple[GlobalType, object]] = set()
    init = initial_configuration(c)
    queue = deque(((a.initial, init, ()),))
    seen_replay.add((a.initial, init))
    while queue:
        state, cfg, trace = queue.popleft()
        replayed += 1
        for edge in a.out(state):
            _, label, tgt = edge
            if label is None:
                nxt_cfg, nxt_trace = cfg, trace
            elif len(trace) + 2 <= depth:
                nxt_cfg, nxt_trace = cfg, trace
                for event in split_event(label):
                    try:
                        nxt_cfg = csm_step(c, nxt_cfg, event)
                    except NotEnabled:
                        return FidelityReport(
                            False, "replay", nxt_trace + (event,), replayed, 0
                        )
                    nxt_trace = nxt_trace + (event,)
            else:
                continue
            key = (tgt, nxt_cfg)
            if key not in seen_replay:
                seen_replay.add(key)
                queue.append((tgt, nxt_cfg, nxt_trace))

    # Obligation 2: machine traces are consistent with some protocol run,
    # deduplicated by per-role views (consistency only depends on those).
    roles = tuple(sorted(c.machines, key=lambda r: r.name))
    checked = 0
    empty_key = ((),) * len(roles)
    seen_views: set[tuple] = {empty_key}
    frontier: deque[tuple[CsmConfiguration, tuple[AsyncEvent, ...], tuple]] = deque(
        ((init, (), empty_key),)
    )
    while frontier:
        cfg, trace, key = frontier.popleft()
        if len(trace) >= depth:
            continue
        for e in enabled_events(c, cfg):
            if e.is_send and len(cfg.channel(e.active, e.peer)) >= channel_bound:
                continue
            i = roles.index(e.active)
            nxt_key = key[:i] + (key[i] + (e,),) + key[i + 1 :]
            if nxt_key in seen_views:
                continue
            seen_views.add(nxt_key)
            nxt_trace = trace + (e,)
            checked += 1
            if intersection_witness(g, nxt_trace, automaton=a) is None:
                return FidelityReport(False, "intersection", nxt_trace, replayed, checked)
            frontier.append((csm_step(c, cfg, e), nxt_trace, nxt_key))

    # Obligation 3: no deadlock within the bound.
    report = explore(c, channel_bound=channel_bound, depth=depth)
    if report.deadlocks:
        _, witness = report.deadlocks[0]
        return FidelityReport(False, "deadlock", witness, replayed, checked)

    return FidelityReport(True, None, None, replayed, checked)


# --------------------------------------------------------------------------- #
# Scalable hard instances
# --------------------------------------------------------------------------- #


def generate_gk(k: int) -> GlobalType:
    """A protocol whose receiver machine needs at least ``2**k`` states.

    Role p repeatedly tells r whether to stay (``s``) or leave (``l``) a
    loop, while streaming ``a``/``b`` letters to q.  After leaving, p sends
    ``k - 1`` further letters and then ``d``, and q must answer with the
    letter p sent *k letters before* ``d`` — so q's machine has to remember
    the last ``k`` letters.  The protocol is well-formed and implementable
    for every ``k >= 1``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    p, q, r = Role("p"), Role("q"), Role("r")
    a, b, d, stay, leave = (Message(x) for x in ("a", "b", "d", "s", "l"))

    def answer(letter: Message) -> GlobalType:
        return exchange(p, q, d, exchange(q, p, letter, END))

    tail_a: GlobalType = answer(a)
    tail_b: GlobalType = answer(b)
    for _ in range(k - 1):
        tail_a = Choice(p, (Branch(q, a, tail_a), Branch(q, b, tail_a)))
        tail_b = Choice(p, (Branch(q, a, tail_b), Branch(q, b, tail_b)))
    loop = Choice(p, (Branch(q, a, Var("t")), Branch(q, b, Var("t"))))
    leave_body = Choice(p, (Branch(q, a, tail_a), Branch(q, b, tail_b)))
    return Rec(
        "t",
        Choice(p, (Branch(r, stay, loop), Branch(r, leave, leave_body))),
    )
