"""Subset construction: per-role deterministic machines."""
from __future__ import annotations

from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from gtproj import (
    END,
    Message,
    Role,
    SubsetState,
    bounded_local_language_check,
    build_gaut,
    build_projections,
    epsilon_closure,
    erase,
    machine_to_dot,
    parse_global_type,
    receive,
    roles_of,
    send,
    subset_construction,
)
from gtproj.corpus import entries, load

from .strategies import random_global_type

P, Q, R = Role("p"), Role("q"), Role("r")
O, M, B = Message("o"), Message("m"), Message("b")

global_types = st.builds(
    lambda seed: random_global_type(Random(seed), max_size=14),
    st.integers(0, 2**32 - 1),
)


def members(state: SubsetState) -> set:
    return set(state)


# --------------------------------------------------------------------------- #
# Subset states
# --------------------------------------------------------------------------- #


def test_subset_state_dedups_and_orders_members():
    g = load("g_s")
    s = SubsetState.of((g, END, g))
    assert len(s) == 2
    assert s == SubsetState.of((END, g))
    assert s.ids == tuple(sorted(n.intern_id for n in (g, END)))
    assert str(s) == "{" + ",".join(str(i) for i in s.ids) + "}"


def test_subset_state_rejects_empty():
    with pytest.raises(ValueError):
        SubsetState.of(())


# --------------------------------------------------------------------------- #
# Closures and hand-checked machines
# --------------------------------------------------------------------------- #


def test_epsilon_closure_collects_silently_reachable_states():
    g = load("g_s")
    nfa = erase(build_gaut(g), R)  # p->q edges are silent for r
    top_o = parse_global_type("r->q:o . 0")
    top_m = parse_global_type("r->q:m . 0")
    assert epsilon_closure(nfa, (g,)) == frozenset((g, top_o, top_m))


def test_machine_of_sender_after_silent_prefix():
    g = load("g_s")
    m = subset_construction(g, R)
    top_o = parse_global_type("r->q:o . 0")
    top_m = parse_global_type("r->q:m . 0")
    assert members(m.initial) == {g, top_o, top_m}
    assert len(m.states) == 2
    assert [(e, members(t)) for e, t in m.out(m.initial)] == [
        (send(R, Q, M), {END}),
        (send(R, Q, O), {END}),
    ]
    assert m.finals == frozenset((m.states[1],))


def test_machine_of_receiver_tracks_both_branches():
    g = load("g_s")
    m = subset_construction(g, Q)
    assert len(m.states) == 4
    assert members(m.initial) == {g}
    first = dict(m.out(m.initial))
    assert set(first) == {receive(Q, P, O), receive(Q, P, M)}
    after_o = first[receive(Q, P, O)]
    assert members(after_o) == {parse_global_type("r->q:o . 0")}
    assert dict(m.out(after_o)).keys() == {receive(Q, R, O)}


def test_machine_folds_states_reached_by_both_branches():
    # p's view of the continuations is silent, so both branch targets close
    # into the same subset and the machine has a single post-send state.
    g = load("g_s")
    m = subset_construction(g, P)
    top_o = parse_global_type("r->q:o . 0")
    top_m = parse_global_type("r->q:m . 0")
    assert len(m.states) == 3
    assert members(m.step(m.initial, send(P, Q, O))) == {top_o, END}
    assert members(m.step(m.initial, send(P, Q, M))) == {top_m, END}
    assert len(m.finals) == 2


def test_machine_of_terminated_protocol():
    m = subset_construction(parse_global_type("0"), P)
    assert len(m.states) == 1
    assert m.finals == frozenset((m.initial,))
    assert m.out(m.initial) == ()


def test_step_returns_none_for_missing_transition():
    m = subset_construction(load("g_s"), R)
    assert m.step(m.initial, receive(R, Q, O)) is None


def test_state_numbers_follow_discovery_order():
    m = subset_construction(load("g_r"), R)
    assert m.state_number(m.initial) == 0
    assert [m.state_number(s) for s in m.states] == list(range(len(m.states)))


# --------------------------------------------------------------------------- #
# Machine invariants
# --------------------------------------------------------------------------- #


def _machine_invariants(g):
    _, table = build_projections(g)
    for role, (nfa, m) in table.items():
        assert m.role == role
        assert m.states[0] == m.initial
        # reachable: walk transitions from the initial state
        seen = {m.initial}
        frontier = [m.initial]
        while frontier:
            state = frontier.pop()
            for _, target in m.out(state):
                if target not in seen:
                    seen.add(target)
                    frontier.append(target)
        assert seen == set(m.states)
        # deterministic: one successor per (state, label)
        for state in m.states:
            labels = [e for e, _ in m.out(state)]
            assert len(labels) == len(set(labels))
            assert len(members(state)) > 0
        # finals are exactly the states containing the terminated protocol
        assert m.finals == frozenset(s for s in m.states if END in s)


def test_corpus_machines_satisfy_invariants():
    for entry in entries():
        _machine_invariants(entry.load())


@settings(max_examples=40, deadline=None)
@given(global_types)
def test_random_machines_satisfy_invariants(g):
    _machine_invariants(g)


def test_build_projections_orders_roles_by_first_occurrence():
    g = load("g_s")
    _, table = build_projections(g)
    assert tuple(table) == roles_of(g) == (P, Q, R)


# --------------------------------------------------------------------------- #
# The machine accepts exactly the view's language (bounded)
# --------------------------------------------------------------------------- #


def test_bounded_language_equality_on_corpus():
    for entry in entries():
        g = entry.load()
        for role in roles_of(g):
            assert bounded_local_language_check(g, role, depth=6), (
                entry.name,
                role.name,
            )


@settings(max_examples=25, deadline=None)
@given(global_types)
def test_bounded_language_equality_on_random_types(g):
    for role in roles_of(g):
        assert bounded_local_language_check(g, role, depth=5)


# --------------------------------------------------------------------------- #
# DOT rendering
# --------------------------------------------------------------------------- #


def test_machine_to_dot_shape():
    text = machine_to_dot(subset_construction(load("g_s"), R))
    assert 'digraph "machine_r"' in text
    assert "doublecircle" in text
    assert "r>q!o" in text
