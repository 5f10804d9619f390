"""Deterministic per-role machines via subset construction.

The local view of a role (:class:`~gtproj.automata.LocalNfa`) is
nondeterministic because exchanges between other roles turn into silent
steps.  :func:`subset_construction` determinizes it in the textbook way —
states become silent-closed sets of subterms — except that no states are
merged or minimized beyond the closure itself: keeping the member subterms
visible is what later lets the validity checks reason about *which* branch
of the protocol each member belongs to.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional

from .automata import (
    AsyncEvent,
    LocalNfa,
    SyncAutomaton,
    build_gaut,
    erase,
)
from .syntax import GlobalType, Role, roles_of

__all__ = [
    "SubsetState",
    "SubsetMachine",
    "epsilon_closure",
    "determinize",
    "subset_construction",
    "build_projections",
    "bounded_local_language_check",
    "machine_to_dot",
]


@dataclass(frozen=True, slots=True)
class SubsetState:
    """A deterministic state: a non-empty, silent-closed set of subterms.

    Members are kept sorted by intern id so equal sets are one value.
    """

    members: tuple[GlobalType, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("subset state must be non-empty")

    @staticmethod
    def of(members: Iterable[GlobalType]) -> "SubsetState":
        unique = {m.intern_id: m for m in members}
        return SubsetState(tuple(unique[i] for i in sorted(unique)))

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(m.intern_id for m in self.members)

    def __iter__(self) -> Iterator[GlobalType]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, node: object) -> bool:
        return any(node == m for m in self.members)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.ids) + "}"


def _label_key(e: AsyncEvent) -> tuple[str, str, str]:
    return (e.peer.name, e.message.label, e.direction.value)


class SubsetMachine:
    """A deterministic machine for one role.

    ``states`` are in breadth-first discovery order (the initial state
    first, successors by sorted label); ``transitions`` maps
    ``(state, event)`` to the successor state; a state is final when it
    contains the terminated protocol.
    """

    __slots__ = ("role", "states", "transitions", "initial", "finals", "_out", "_index")

    def __init__(
        self,
        role: Role,
        states: tuple[SubsetState, ...],
        transitions: Mapping[tuple[SubsetState, AsyncEvent], SubsetState],
        initial: SubsetState,
        finals: frozenset[SubsetState],
    ) -> None:
        self.role = role
        self.states = states
        self.transitions = dict(transitions)
        self.initial = initial
        self.finals = finals
        out: dict[SubsetState, list[tuple[AsyncEvent, SubsetState]]] = {
            s: [] for s in states
        }
        for (src, event), tgt in self.transitions.items():
            out[src].append((event, tgt))
        self._out = {
            s: tuple(sorted(moves, key=lambda m: _label_key(m[0])))
            for s, moves in out.items()
        }
        self._index = {s: i for i, s in enumerate(states)}

    def out(self, state: SubsetState) -> tuple[tuple[AsyncEvent, SubsetState], ...]:
        """Outgoing (event, successor) pairs in sorted label order."""
        return self._out[state]

    def step(self, state: SubsetState, event: AsyncEvent) -> Optional[SubsetState]:
        """Successor under ``event``, or ``None`` when not enabled."""
        return self.transitions.get((state, event))

    def state_number(self, state: SubsetState) -> int:
        """Breadth-first discovery index of ``state``."""
        return self._index[state]

    def __len__(self) -> int:
        return len(self.states)


def epsilon_closure(
    nfa: LocalNfa, seed: Iterable[GlobalType]
) -> frozenset[GlobalType]:
    """All states reachable from ``seed`` through silent transitions only,
    including the seed itself."""
    closure: set[GlobalType] = set()
    for state in seed:
        closure.update(nfa.eps_closure_of(state))
    return frozenset(closure)


def determinize(nfa: LocalNfa) -> SubsetMachine:
    """Subset construction over a role's local view.

    Successor sets take the labeled step first and then close under silent
    steps; the initial state is the silent closure of the view's initial
    state.  Empty sets are never created (a label is only followed where
    some member enables it), and every reachable state is kept.
    """
    initial = SubsetState.of(epsilon_closure(nfa, (nfa.initial,)))
    order: dict[SubsetState, int] = {initial: 0}
    transitions: dict[tuple[SubsetState, AsyncEvent], SubsetState] = {}
    queue: deque[SubsetState] = deque((initial,))
    while queue:
        state = queue.popleft()
        moves: dict[AsyncEvent, set[GlobalType]] = {}
        for member in state:
            for _, label, tgt in nfa.out(member):
                if label is not None:
                    moves.setdefault(label, set()).add(tgt)
        for label in sorted(moves, key=_label_key):
            successor = SubsetState.of(epsilon_closure(nfa, moves[label]))
            transitions[(state, label)] = successor
            if successor not in order:
                order[successor] = len(order)
                queue.append(successor)
    states = tuple(order)
    finals = frozenset(s for s in states if any(m in nfa.finals for m in s))
    return SubsetMachine(nfa.role, states, transitions, initial, finals)


def subset_construction(g: GlobalType, p: Role) -> SubsetMachine:
    """The deterministic machine of role ``p`` for protocol ``g``."""
    return determinize(erase(build_gaut(g), p))


def build_projections(
    g: GlobalType,
) -> tuple[SyncAutomaton, dict[Role, tuple[LocalNfa, SubsetMachine]]]:
    """One synchronous automaton plus, per role, its view and machine.

    Shares the automaton across roles; the returned mapping iterates in the
    protocol's first-occurrence role order.
    """
    a = build_gaut(g)
    table: dict[Role, tuple[LocalNfa, SubsetMachine]] = {}
    for role in roles_of(g):
        nfa = erase(a, role)
        table[role] = (nfa, determinize(nfa))
    return a, table


# --------------------------------------------------------------------------- #
# Bounded language equality
# --------------------------------------------------------------------------- #


def _nfa_words(nfa: LocalNfa, depth: int) -> frozenset[tuple[AsyncEvent, ...]]:
    """Every event word of length <= depth spelled by some path of the view."""
    words: set[tuple[AsyncEvent, ...]] = set()
    seen: set[tuple[GlobalType, tuple[AsyncEvent, ...]]] = set()
    queue: deque[tuple[GlobalType, tuple[AsyncEvent, ...]]] = deque()
    start = (nfa.initial, ())
    seen.add(start)
    queue.append(start)
    while queue:
        state, word = queue.popleft()
        words.add(word)
        for _, label, tgt in nfa.out(state):
            if label is None:
                nxt = (tgt, word)
            elif len(word) < depth:
                nxt = (tgt, word + (label,))
            else:
                continue
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(words)


def _machine_words(m: SubsetMachine, depth: int) -> frozenset[tuple[AsyncEvent, ...]]:
    """Every event word of length <= depth accepted along the machine."""
    words: set[tuple[AsyncEvent, ...]] = set()
    queue: deque[tuple[SubsetState, tuple[AsyncEvent, ...]]] = deque(((m.initial, ()),))
    while queue:
        state, word = queue.popleft()
        words.add(word)
        if len(word) == depth:
            continue
        for event, tgt in m.out(state):
            queue.append((tgt, word + (event,)))
    return frozenset(words)


def bounded_local_language_check(g: GlobalType, p: Role, depth: int = 10) -> bool:
    """Compare, up to ``depth`` events, the words of role ``p``'s
    nondeterministic view against its determinized machine.

    This equality is a structural fact about the construction (it holds for
    every protocol, implementable or not); the check exists to catch
    regressions in the erasure or the subset construction.
    """
    a = build_gaut(g)
    nfa = erase(a, p)
    m = determinize(nfa)
    return _nfa_words(nfa, depth) == _machine_words(m, depth)


# --------------------------------------------------------------------------- #
# DOT export
# --------------------------------------------------------------------------- #


def machine_to_dot(m: SubsetMachine, name: Optional[str] = None) -> str:
    """Graphviz rendering; states are labeled with their member subterm ids."""
    from .automata import _quote  # shared quoting rules

    title = name if name is not None else f"machine_{m.role}"
    lines = [f"digraph {_quote(title)} {{", "  rankdir=LR;"]
    lines.append('  __start [shape=point, label=""];')
    lines.append(f"  __start -> n{m.state_number(m.initial)};")
    for i, s in enumerate(m.states):
        shape = "doublecircle" if s in m.finals else "circle"
        lines.append(f"  n{i} [shape={shape}, label={_quote(str(s))}];")
    for s in m.states:
        for event, tgt in m.out(s):
            lines.append(
                f"  n{m.state_number(s)} -> n{m.state_number(tgt)} "
                f"[label={_quote(str(event))}];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
