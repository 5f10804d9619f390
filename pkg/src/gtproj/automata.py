"""Synchronous protocol automata and their per-role local views.

:func:`build_gaut` turns a protocol into a finite automaton whose states are
the protocol's interned subterms: each choice steps to a branch continuation
under the exchange label ``p->q:m``, and ``mu``/variable nodes contribute
silent (epsilon) bookkeeping steps.  :func:`erase` relabels that automaton
for one role: an exchange the role sends becomes a send event ``p>q!m``, an
exchange it receives becomes a receive event ``p<q?m``, and everything else
becomes silent.  Splitting a synchronous word into its asynchronous send and
receive halves lives here too (:func:`split_word`).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional

from .syntax import (
    END,
    GlobalType,
    Message,
    Rec,
    Role,
    Var,
    Choice,
    binders,
    pretty_inline,
    subterms,
)

__all__ = [
    "Direction",
    "SyncEvent",
    "AsyncEvent",
    "send",
    "receive",
    "split_event",
    "split_word",
    "erase_label",
    "project_word",
    "format_trace",
    "parse_trace",
    "Edge",
    "LocalEdge",
    "SyncAutomaton",
    "build_gaut",
    "LocalNfa",
    "erase",
    "sync_to_dot",
    "nfa_to_dot",
]


# --------------------------------------------------------------------------- #
# Events
# --------------------------------------------------------------------------- #


class Direction(Enum):
    """Whether an asynchronous event puts a message into a channel (``!``)
    or takes one out (``?``)."""

    SEND = "!"
    RECEIVE = "?"


@dataclass(frozen=True, slots=True, order=True)
class SyncEvent:
    """A synchronous exchange ``sender->receiver:message``."""

    sender: Role
    receiver: Role
    message: Message

    def __post_init__(self) -> None:
        if self.sender == self.receiver:
            raise ValueError(f"role {self.sender} cannot message itself")

    def __str__(self) -> str:
        return f"{self.sender}->{self.receiver}:{self.message}"


@dataclass(frozen=True, slots=True)
class AsyncEvent:
    """One half of an exchange, from the acting role's point of view.

    ``p>q!m`` — ``active`` p pushes ``message`` m onto channel (p, q);
    ``p<q?m`` — ``active`` p pops ``message`` m from channel (q, p).
    """

    direction: Direction
    active: Role
    peer: Role
    message: Message

    def __post_init__(self) -> None:
        if self.active == self.peer:
            raise ValueError(f"role {self.active} cannot message itself")

    @property
    def is_send(self) -> bool:
        return self.direction is Direction.SEND

    def __str__(self) -> str:
        if self.is_send:
            return f"{self.active}>{self.peer}!{self.message}"
        return f"{self.active}<{self.peer}?{self.message}"


def send(sender: Role, receiver: Role, message: Message) -> AsyncEvent:
    """The send half ``sender>receiver!message``."""
    return AsyncEvent(Direction.SEND, sender, receiver, message)


def receive(receiver: Role, sender: Role, message: Message) -> AsyncEvent:
    """The receive half ``receiver<sender?message``."""
    return AsyncEvent(Direction.RECEIVE, receiver, sender, message)


def split_event(e: SyncEvent) -> tuple[AsyncEvent, AsyncEvent]:
    """The asynchronous halves of one exchange: send first, then receive."""
    return (
        send(e.sender, e.receiver, e.message),
        receive(e.receiver, e.sender, e.message),
    )


def split_word(w: Iterable[SyncEvent]) -> tuple[AsyncEvent, ...]:
    """Homomorphic splitting: each exchange becomes its send immediately
    followed by its receive."""
    out: list[AsyncEvent] = []
    for e in w:
        out.extend(split_event(e))
    return tuple(out)


def erase_label(e: SyncEvent, p: Role) -> Optional[AsyncEvent]:
    """The role-``p`` view of one exchange: its send half if ``p`` sends,
    its receive half if ``p`` receives, ``None`` (silent) otherwise."""
    if e.sender == p:
        return send(e.sender, e.receiver, e.message)
    if e.receiver == p:
        return receive(e.receiver, e.sender, e.message)
    return None


def project_word(w: Iterable[AsyncEvent], p: Role) -> tuple[AsyncEvent, ...]:
    """The subsequence of ``w`` whose events ``p`` performs."""
    return tuple(e for e in w if e.active == p)


def format_trace(events: Iterable[AsyncEvent]) -> str:
    """Render events in dotted token form, e.g. ``p>q!o.q<p?o``."""
    return ".".join(str(e) for e in events)


_TRACE_TOKEN = re.compile(
    r"(?P<active>[A-Za-z_][A-Za-z0-9_]*)"
    r"(?P<dir>[<>])"
    r"(?P<peer>[A-Za-z_][A-Za-z0-9_]*)"
    r"(?P<op>[!?])"
    r"(?P<msg>[A-Za-z_][A-Za-z0-9_]*)"
    r"\Z"
)


def parse_trace(text: str) -> tuple[AsyncEvent, ...]:
    """Parse dotted token form back into events; inverse of
    :func:`format_trace`.  Raises ``ValueError`` on malformed tokens."""
    text = text.strip()
    if not text:
        return ()
    events: list[AsyncEvent] = []
    for token in text.split("."):
        m = _TRACE_TOKEN.match(token.strip())
        if m is None:
            raise ValueError(f"malformed trace token {token!r}")
        shape = (m.group("dir"), m.group("op"))
        if shape == (">", "!"):
            events.append(
                send(Role(m.group("active")), Role(m.group("peer")), Message(m.group("msg")))
            )
        elif shape == ("<", "?"):
            events.append(
                receive(Role(m.group("active")), Role(m.group("peer")), Message(m.group("msg")))
            )
        else:
            raise ValueError(f"malformed trace token {token!r}")
    return tuple(events)


# --------------------------------------------------------------------------- #
# The synchronous automaton
# --------------------------------------------------------------------------- #

#: A transition of the synchronous automaton; label ``None`` is silent.
Edge = tuple[GlobalType, Optional[SyncEvent], GlobalType]

#: A transition of a per-role view; label ``None`` is silent.
LocalEdge = tuple[GlobalType, Optional[AsyncEvent], GlobalType]


def _sync_label_key(label: Optional[SyncEvent]) -> tuple[str, str, str]:
    if label is None:
        return ("", "", "")
    return (label.sender.name, label.receiver.name, label.message.label)


class SyncAutomaton:
    """The synchronous automaton of a protocol.

    ``states`` are the protocol's distinct subterms (first-occurrence order)
    together with the terminated protocol, which is the single final state;
    ``transitions`` are stored sorted by (source id, label, target id).
    Every non-final state has at least one outgoing transition.
    """

    __slots__ = ("states", "transitions", "initial", "finals", "_out")

    def __init__(
        self,
        states: Iterable[GlobalType],
        transitions: Iterable[Edge],
        initial: GlobalType,
        finals: frozenset[GlobalType],
    ) -> None:
        self.states: tuple[GlobalType, ...] = tuple(states)
        self.transitions: tuple[Edge, ...] = tuple(
            sorted(
                transitions,
                key=lambda t: (t[0].intern_id, _sync_label_key(t[1]), t[2].intern_id),
            )
        )
        self.initial = initial
        self.finals = finals
        out: dict[GlobalType, list[Edge]] = {s: [] for s in self.states}
        for t in self.transitions:
            out[t[0]].append(t)
        self._out = {s: tuple(es) for s, es in out.items()}

    def out(self, state: GlobalType) -> tuple[Edge, ...]:
        """Outgoing transitions of ``state``, in sorted label order."""
        return self._out[state]

    def __contains__(self, state: GlobalType) -> bool:
        return state in self._out


def build_gaut(g: GlobalType) -> SyncAutomaton:
    """Build the synchronous automaton of ``g``.

    States: all distinct subterms, plus the terminated protocol even when the
    text never reaches it (it is then an isolated, unreachable final state).
    Transitions: one labeled edge per choice branch, one silent edge from
    each ``mu`` node to its body and from each variable to its binder.
    """
    subs = subterms(g)
    bind = binders(g)
    states = list(subs)
    if END not in set(subs):
        states.append(END)
    transitions: list[Edge] = []
    for node in subs:
        if isinstance(node, Choice):
            for b in node.branches:
                transitions.append(
                    (node, SyncEvent(node.sender, b.receiver, b.message), b.continuation)
                )
        elif isinstance(node, Rec):
            transitions.append((node, None, node.body))
        elif isinstance(node, Var):
            binder = bind.get(node.var)
            if binder is None:
                raise ValueError(f"unbound recursion variable {node.var!r}")
            transitions.append((node, None, binder))
    return SyncAutomaton(states, transitions, g, frozenset((END,)))


# --------------------------------------------------------------------------- #
# Per-role views
# --------------------------------------------------------------------------- #


class LocalNfa:
    """One role's (nondeterministic) view of a synchronous automaton.

    States, initial state, and final states are exactly those of the source
    automaton; each transition is the erasure image of exactly one source
    transition, in the same order.  Single-state silent closures are cached.
    """

    __slots__ = ("role", "states", "transitions", "initial", "finals", "_out", "_eps")

    def __init__(
        self,
        role: Role,
        states: tuple[GlobalType, ...],
        transitions: tuple[LocalEdge, ...],
        initial: GlobalType,
        finals: frozenset[GlobalType],
    ) -> None:
        self.role = role
        self.states = states
        self.transitions = transitions
        self.initial = initial
        self.finals = finals
        out: dict[GlobalType, list[LocalEdge]] = {s: [] for s in states}
        for t in transitions:
            out[t[0]].append(t)
        self._out = {s: tuple(es) for s, es in out.items()}
        self._eps: dict[GlobalType, frozenset[GlobalType]] = {}

    def out(self, state: GlobalType) -> tuple[LocalEdge, ...]:
        """Outgoing transitions of ``state``."""
        return self._out[state]

    def eps_closure_of(self, state: GlobalType) -> frozenset[GlobalType]:
        """States reachable from ``state`` through silent transitions only
        (including ``state`` itself); cached."""
        cached = self._eps.get(state)
        if cached is not None:
            return cached
        seen = {state}
        stack = [state]
        while stack:
            node = stack.pop()
            for _, label, tgt in self._out[node]:
                if label is None and tgt not in seen:
                    seen.add(tgt)
                    stack.append(tgt)
        closure = frozenset(seen)
        self._eps[state] = closure
        return closure


def erase(a: SyncAutomaton, p: Role) -> LocalNfa:
    """Relabel ``a`` with role ``p``'s view of each transition.

    Exchanges not involving ``p`` become silent; states, initial state, and
    final states are unchanged.
    """
    transitions = tuple(
        (src, erase_label(label, p) if label is not None else None, tgt)
        for (src, label, tgt) in a.transitions
    )
    return LocalNfa(p, a.states, transitions, a.initial, a.finals)


# --------------------------------------------------------------------------- #
# DOT export
# --------------------------------------------------------------------------- #


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _state_label(state: GlobalType, limit: int = 40) -> str:
    text = pretty_inline(state)
    if len(text) > limit:
        text = text[: limit - 1] + "…"
    return f"{state.intern_id}: {text}"


def _machine_dot(
    name: str,
    states: tuple[GlobalType, ...],
    initial: GlobalType,
    finals: frozenset[GlobalType],
    edges: Iterable[tuple[GlobalType, str, GlobalType]],
) -> Iterator[str]:
    index = {s: i for i, s in enumerate(states)}
    yield f"digraph {_quote(name)} {{"
    yield "  rankdir=LR;"
    yield '  __start [shape=point, label=""];'
    yield f"  __start -> n{index[initial]};"
    for s, i in index.items():
        shape = "doublecircle" if s in finals else "circle"
        yield f"  n{i} [shape={shape}, label={_quote(_state_label(s))}];"
    for src, label, tgt in edges:
        yield f"  n{index[src]} -> n{index[tgt]} [label={_quote(label)}];"
    yield "}"


def sync_to_dot(a: SyncAutomaton, name: str = "protocol") -> str:
    """Graphviz rendering of a synchronous automaton; silent edges show ε."""
    edges = (
        (src, "ε" if label is None else str(label), tgt)
        for (src, label, tgt) in a.transitions
    )
    return "\n".join(_machine_dot(name, a.states, a.initial, a.finals, edges)) + "\n"


def nfa_to_dot(n: LocalNfa, name: Optional[str] = None) -> str:
    """Graphviz rendering of one role's view; silent edges show ε."""
    edges = (
        (src, "ε" if label is None else str(label), tgt)
        for (src, label, tgt) in n.transitions
    )
    title = name if name is not None else f"view_{n.role}"
    return "\n".join(_machine_dot(title, n.states, n.initial, n.finals, edges)) + "\n"
