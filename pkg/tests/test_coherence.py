import pytest
from hypothesis import given, strategies as st

from capcoherence.coherence import (
    ALL_STATES,
    HW_TRANSITIONS,
    TRANSITIONS,
    AuthEvent,
    AuthState,
    HwMesiEvent,
    HwMesiState,
    Op,
    TransientState,
    completion_events,
    effective_ops,
    is_valid,
    map_hw_event,
    permitted_ops,
    phi,
    reachable_from,
    transition,
    verify_structural_equivalence,
)
from capcoherence.errors import InvalidTransition

S, E, M, I = AuthState.S, AuthState.E, AuthState.M, AuthState.I


@pytest.mark.parametrize(
    "state, event, expected",
    [
        (I, AuthEvent.GRANT_SHARED, S),
        (I, AuthEvent.GRANT_EXCLUSIVE, E),
        (E, AuthEvent.DELEGATE, M),
        (E, AuthEvent.REVOKE, TransientState.EIA),
        (TransientState.EIA, AuthEvent.ACK, I),
        (S, AuthEvent.REVOKE, TransientState.SIA),
        (TransientState.SIA, AuthEvent.ACK, I),
        (M, AuthEvent.REVOKE_CASCADE, TransientState.MIC),
        (TransientState.MIC, AuthEvent.ALL_ACKS, I),
        (S, AuthEvent.EXHAUST, I),
        (S, AuthEvent.EXPIRE, I),
    ],
)
def test_table_rows(state, event, expected):
    assert transition(state, event) == expected


@pytest.mark.parametrize(
    "state, event",
    [
        (I, AuthEvent.REVOKE),
        (S, AuthEvent.DELEGATE),
        (M, AuthEvent.GRANT_SHARED),
        (E, AuthEvent.GRANT_EXCLUSIVE),
        (M, AuthEvent.REVOKE),
        (E, AuthEvent.EXHAUST),
    ],
)
def test_invalid_pairs_raise(state, event):
    with pytest.raises(InvalidTransition) as exc:
        transition(state, event)
    assert exc.value.state == state and exc.value.event == event


def test_grant_in_flight_goes_through_transient():
    assert transition(I, AuthEvent.GRANT_SHARED, in_flight=True) is TransientState.ISG
    assert transition(TransientState.ISG, AuthEvent.GRANT_SHARED) is S
    assert transition(I, AuthEvent.GRANT_EXCLUSIVE, in_flight=True) is TransientState.IED
    assert transition(TransientState.IED, AuthEvent.GRANT_EXCLUSIVE) is E


@given(st.sampled_from(ALL_STATES), st.sampled_from(list(AuthEvent)))
def test_transition_is_total(state, event):
    # every pair either has a successor or raises; nothing else escapes
    if is_valid(state, event):
        assert transition(state, event) in ALL_STATES
    else:
        with pytest.raises(InvalidTransition):
            transition(state, event)


@given(st.sampled_from(ALL_STATES))
def test_introspect_is_a_no_op(state):
    assert transition(state, AuthEvent.INTROSPECT) is state


def test_each_transient_has_exactly_one_completion():
    completions = completion_events()
    for t, events in completions.items():
        assert events == [t.awaits], t
        assert transition(t, t.awaits) is t.target


def test_modified_only_entered_from_exclusive_by_delegation():
    into_m = [(src, ev) for (src, ev), dst in TRANSITIONS.items() if dst is M]
    assert into_m == [(E, AuthEvent.DELEGATE)]
    no_delegate = reachable_from(I, avoid=lambda s, e, d: e is AuthEvent.DELEGATE)
    assert M not in no_delegate
    assert M in reachable_from(I)


@given(st.sampled_from(ALL_STATES))
def test_every_state_can_reach_invalid(state):
    assert I in reachable_from(state)


def test_permitted_ops_strictly_widen_up_the_lattice():
    assert permitted_ops(I).ops == frozenset()
    assert permitted_ops(S).ops < permitted_ops(E).ops < permitted_ops(M).ops
    assert Op.DELEGATE in permitted_ops(M)
    assert Op.WRITE not in permitted_ops(S)


def test_permitted_ops_rejects_transients_but_effective_ops_inherits():
    with pytest.raises(InvalidTransition):
        permitted_ops(TransientState.EIA)
    assert effective_ops(TransientState.MIC) == permitted_ops(M)
    assert effective_ops(TransientState.ISG) == permitted_ops(I)


def test_phi_is_a_bijection_on_stable_states():
    images = {phi(h) for h in HwMesiState}
    assert images == set(AuthState)
    assert map_hw_event(HwMesiEvent.SnoopInvalidate) is AuthEvent.REVOKE


def test_hardware_table_is_complete():
    assert len(HW_TRANSITIONS) == len(HwMesiState) * len(HwMesiEvent) == 16
    assert sum(v is not None for v in HW_TRANSITIONS.values()) == 6


def test_equivalence_verdict_and_extensions():
    report = verify_structural_equivalence()
    assert report.verdict
    assert len(report.checks) == 6 and all(c.matched for c in report.checks)
    assert {ev for _, ev, _ in report.authorization_only} == {AuthEvent.EXHAUST, AuthEvent.EXPIRE}


def test_equivalence_detects_a_missing_row():
    broken = {k: v for k, v in TRANSITIONS.items() if k != (M, AuthEvent.REVOKE_CASCADE)}
    report = verify_structural_equivalence(auth_table=broken)
    assert not report.verdict
    assert [c.hw for c in report.missing] == [(HwMesiState.M_hw, HwMesiEvent.SnoopInvalidate, HwMesiState.I_hw)]
