"""Send/receive validity, available messages, verdicts, counterexamples."""
from __future__ import annotations

from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from gtproj import (
    AvailableMessageQuery,
    Csm,
    END,
    IllFormedProtocolError,
    InternalError,
    Message,
    Role,
    ViolationKind,
    available_messages,
    build_projections,
    check_implementability,
    check_no_mixed_choice,
    check_receive_validity,
    check_send_validity,
    intersection_witness,
    parse_global_type,
    parse_trace,
    replay_trace,
    roles_of,
    send,
    subset_construction,
    subterms,
    transition_origins_destinations,
)
from gtproj.corpus import entries, load

from .strategies import random_global_type, rename_consistently

P, Q, R = Role("p"), Role("q"), Role("r")
O, M = Message("o"), Message("m")

global_types = st.builds(
    lambda seed: random_global_type(Random(seed), max_size=12),
    st.integers(0, 2**32 - 1),
)


def projection_of(g, role):
    _, table = build_projections(g)
    return table[role]


# --------------------------------------------------------------------------- #
# Transition origins and destinations
# --------------------------------------------------------------------------- #


def test_origins_include_members_with_silent_prefixes():
    g = load("g_s")
    nfa, m = projection_of(g, R)
    target = m.step(m.initial, send(R, Q, O))
    origins, destinations = transition_origins_destinations(
        m, nfa, (m.initial, send(R, Q, O), target)
    )
    # the root reaches r>q!o after a silent step; the r->q:m branch cannot
    assert origins == frozenset((g, parse_global_type("r->q:o . 0")))
    assert destinations == frozenset((END,))


def test_origins_cover_all_members_in_the_good_variant():
    g = load("g_s_prime")
    nfa, m = projection_of(g, R)
    (event, target), = m.out(m.initial)
    origins, _ = transition_origins_destinations(m, nfa, (m.initial, event, target))
    assert origins == frozenset(iter(m.initial))


def test_destinations_form_the_successor_state():
    g = load("g_r")
    nfa, m = projection_of(g, R)
    for state in m.states:
        for event, target in m.out(state):
            _, destinations = transition_origins_destinations(
                m, nfa, (state, event, target)
            )
            assert destinations == frozenset(iter(target))


def test_origins_rejects_foreign_transition():
    g = load("g_s")
    nfa, m = projection_of(g, R)
    with pytest.raises(ValueError):
        transition_origins_destinations(
            m, nfa, (m.initial, send(R, Q, Message("nope")), m.initial)
        )


# --------------------------------------------------------------------------- #
# Available messages
# --------------------------------------------------------------------------- #


def ask(g, subterm, *blocked):
    return available_messages(g, AvailableMessageQuery(subterm, frozenset(blocked)))


def test_available_at_a_direct_send():
    g = load("g_r")
    sub = parse_global_type("p->r:o . 0")
    result = ask(g, sub, R)
    assert result.events == frozenset((send(P, R, O),))


def test_nothing_available_at_termination():
    g = load("g_s")
    assert ask(g, END, R).events == frozenset()


def test_blocked_sender_freezes_its_receivers():
    g = parse_global_type("p->q:m . q->r:o . 0")
    # p never moves, so q never receives m and never sends o to r
    assert ask(g, g, P).events == frozenset()


def test_choice_offers_heads_and_filtered_continuations():
    g = load("g_r")
    result = ask(g, g, R)
    assert result.events == frozenset(
        (send(P, Q, O), send(P, Q, M), send(Q, R, O), send(P, R, O))
    )


def test_earlier_exchange_hides_later_sends_on_the_same_channel():
    g = parse_global_type("p->q:m . p->q:o . 0")
    # only the first p->q send can be the next message r observes... and for
    # the receiver q the head send is visible but the one behind it is not
    result = ask(g, g, Q)
    assert result.events == frozenset((send(P, Q, M),))


def test_witnesses_chain_from_the_queried_subterm_to_the_event():
    g = load("g_r")
    result = ask(g, g, R)
    for event, path in result.witness.items():
        assert event in result.events
        assert path[0][0] == g
        for (_, _, tgt), (src, _, _) in zip(path, path[1:]):
            assert tgt == src
        last_label = path[-1][1]
        assert send(last_label.sender, last_label.receiver, last_label.message) == event


def test_blocked_roles_never_appear_as_senders():
    rng = Random(7)
    for _ in range(50):
        g = random_global_type(rng, max_size=15)
        nodes = subterms(g)
        roles = roles_of(g) or (P,)
        for _ in range(3):
            sub = rng.choice(nodes)
            blocked = frozenset(rng.sample(roles, rng.randint(1, len(roles))))
            result = available_messages(g, AvailableMessageQuery(sub, blocked))
            assert all(e.active not in blocked for e in result.events)


def test_available_messages_rejects_foreign_subterm():
    g = load("g_s")
    other = parse_global_type("p->q:x . 0")
    with pytest.raises(InternalError):
        ask(g, other, R)


# --------------------------------------------------------------------------- #
# Send validity
# --------------------------------------------------------------------------- #


def test_send_validity_violation_on_uninformed_sender():
    g = load("g_s")
    nfa, m = projection_of(g, R)
    violation = check_send_validity(m, nfa)
    assert violation is not None
    assert violation.kind is ViolationKind.SEND_VALIDITY
    assert violation.role == R
    assert violation.state == m.initial
    _, event, _ = violation.details.transition
    assert event == send(R, Q, M)  # label order puts m before o
    assert violation.details.missing == (parse_global_type("r->q:o . 0"),)


def test_send_validity_passes_when_branches_agree():
    g = load("g_s_prime")
    for role in roles_of(g):
        nfa, m = projection_of(g, role)
        assert check_send_validity(m, nfa) is None


# --------------------------------------------------------------------------- #
# Receive validity
# --------------------------------------------------------------------------- #


def test_receive_validity_violation_on_racing_senders():
    g = load("g_r")
    nfa, m = projection_of(g, R)
    violation = check_receive_validity(m, nfa, g)
    assert violation is not None
    assert violation.kind is ViolationKind.RECEIVE_VALIDITY
    assert violation.role == R
    assert violation.state == m.initial
    d = violation.details
    assert d.transition_one[1] == parse_trace("r<p?o")[0]
    assert d.transition_two[1] == parse_trace("r<q?o")[0]
    assert d.witness_subterm == parse_global_type("p->r:o . 0")
    assert d.offending_event == send(P, R, O)
    assert d.witness_suffix[0][0] == d.witness_subterm


def test_receive_validity_passes_when_the_protocol_orders_the_senders():
    g = load("g_r_prime")
    for role in roles_of(g):
        nfa, m = projection_of(g, role)
        assert check_receive_validity(m, nfa, g) is None


def test_same_sender_races_are_allowed():
    # both receives come from p over one queue, so their order is fixed
    g = parse_global_type("+ { p->q:o . 0, p->q:m . 0 }")
    nfa, m = projection_of(g, Q)
    assert check_receive_validity(m, nfa, g) is None


# --------------------------------------------------------------------------- #
# Mixed states
# --------------------------------------------------------------------------- #


def test_mixed_state_detected():
    g = parse_global_type("+ { p->q:l . q->r:m . 0, p->q:r . r->q:m . 0 }")
    assert check_no_mixed_choice(subset_construction(g, R)) is False


def test_unmixed_machines_on_good_corpus():
    for entry in entries():
        if not entry.implementable:
            continue
        g = entry.load()
        for role in roles_of(g):
            assert check_no_mixed_choice(subset_construction(g, role))


# --------------------------------------------------------------------------- #
# The decision procedure
# --------------------------------------------------------------------------- #


def test_corpus_verdict_parity():
    for entry in entries():
        verdict = check_implementability(entry.load())
        assert verdict.implementable == entry.implementable, entry.name
        if entry.implementable:
            assert verdict.projections is not None
            assert verdict.violation is None
            assert verdict.counterexample is None
        else:
            assert verdict.projections is None
            assert verdict.violation.kind is entry.violation
            assert verdict.counterexample


def test_ill_formed_protocol_is_rejected():
    with pytest.raises(IllFormedProtocolError) as exc:
        check_implementability(parse_global_type("mu t . t"))
    assert exc.value.report.violations


def test_counterexample_for_uninformed_sender():
    verdict = check_implementability(load("g_s"))
    assert verdict.counterexample == parse_trace("p>q!o.q<p?o.r>q!m")


def test_counterexample_for_racing_senders():
    verdict = check_implementability(load("g_r"))
    assert verdict.counterexample == parse_trace("p>q!o.q<p?o.q>r!o.p>r!o.r<p?o")


def test_counterexample_for_mixed_send():
    g = parse_global_type("+ { p->q:l . q->r:m . 0, p->q:r . r->q:m . 0 }")
    verdict = check_implementability(g)
    assert not verdict.implementable
    assert verdict.violation.kind is ViolationKind.SEND_VALIDITY
    assert verdict.counterexample[-1] == send(R, Q, M)


def _counterexample_is_verified(g):
    verdict = check_implementability(g)
    assert not verdict.implementable
    _, table = build_projections(g)
    system = Csm({role: machine for role, (_, machine) in table.items()})
    replay_trace(system, verdict.counterexample)  # raises if not executable
    assert intersection_witness(g, verdict.counterexample) is None


def test_counterexamples_replay_but_are_not_protocol_behaviour():
    for name in ("g_s", "g_r"):
        _counterexample_is_verified(load(name))


def test_all_violations_extends_the_first():
    verdict = check_implementability(load("g_s"), all_violations=True)
    assert len(verdict.violations) >= 2  # both of r's sends are uninformed
    assert verdict.violations[0] == verdict.violation
    assert all(v.role == R for v in verdict.violations)


def test_verdict_invariant_under_renaming():
    role_map = {P: Role("x"), Q: Role("y"), R: Role("z")}
    message_map = {O: Message("u"), M: Message("v"), Message("b"): Message("w")}
    for entry in entries():
        g = entry.load()
        renamed = rename_consistently(g, role_map, message_map)
        original = check_implementability(g)
        mirrored = check_implementability(renamed)
        assert original.implementable == mirrored.implementable, entry.name
        if not original.implementable:
            assert original.violation.kind is mirrored.violation.kind
            assert mirrored.violation.role == role_map[original.violation.role]
            assert len(original.counterexample) == len(mirrored.counterexample)


@settings(max_examples=25, deadline=None)
@given(global_types)
def test_random_verdicts_are_stable_under_renaming(g):
    renamed = rename_consistently(
        g,
        {P: Role("z"), Role("z"): P, Q: Role("y"), Role("y"): Q},
        {Message("a"): Message("m"), Message("m"): Message("a")},
    )
    assert (
        check_implementability(g).implementable
        == check_implementability(renamed).implementable
    )
