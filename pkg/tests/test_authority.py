import pytest

from capcoherence.authority import (
    Authority,
    BroadcastMode,
    Mode,
    TrustScore,
    select_broadcast_mode,
)
from capcoherence.coherence import AuthState, TransientState
from capcoherence.errors import (
    AlreadyRevoked,
    DuplicateExclusive,
    InvalidSourceState,
    ScopeEscalation,
    UnknownAgent,
    UnknownCapability,
)
from capcoherence.strategies import StrategyKind, StrategyParams


@pytest.fixture
def auth():
    a = Authority(StrategyKind.RCC, StrategyParams(budget_n=5))
    for name in ("alice", "bob", "carol", "dave"):
        a.register_agent(name)
    return a


def chain(auth):
    root = auth.grant("alice", {"svc.read", "svc.write", "svc.transfer"}, Mode.EXCLUSIVE, name="svc")
    mid = auth.delegate(root.cap_id, "bob", {"svc.read", "svc.write"})
    leaf = auth.delegate(mid.cap_id, "carol", {"svc.read"})
    return root, mid, leaf


def test_grant_modes(auth):
    shared = auth.grant("alice", {"pool.read"})
    excl = auth.grant("bob", {"svc.read"}, Mode.EXCLUSIVE)
    assert shared.state is AuthState.S and excl.state is AuthState.E
    assert shared.budget_n == 5 and shared.ttl_ticks is None


def test_second_exclusive_grant_refused(auth):
    auth.grant("alice", {"x"}, Mode.EXCLUSIVE, name="svc")
    with pytest.raises(DuplicateExclusive):
        auth.grant("bob", {"x"}, Mode.EXCLUSIVE, name="svc")


def test_delegation_builds_lineage(auth):
    root, mid, leaf = chain(auth)
    assert root.state is AuthState.M and mid.state is AuthState.M and leaf.state is AuthState.E
    assert [r.holder for r in auth.lineage(leaf.cap_id)] == ["alice", "bob", "carol"]
    assert leaf.name == "svc/bob/carol"
    assert [r.cap_id for r in auth.descendants(root.cap_id)] == [mid.cap_id, leaf.cap_id]


def test_delegation_rejects_scope_escalation(auth):
    root, mid, _ = chain(auth)
    with pytest.raises(ScopeEscalation):
        auth.delegate(mid.cap_id, "dave", {"svc.transfer"})


def test_cannot_delegate_from_shared(auth):
    pool = auth.grant("alice", {"pool.read"})
    with pytest.raises(InvalidSourceState):
        auth.delegate(pool.cap_id, "bob", {"pool.read"})


def test_unknown_ids(auth):
    with pytest.raises(UnknownAgent):
        auth.grant("mallory", {"x"})
    with pytest.raises(UnknownCapability):
        auth.revoke("cap-9999", 0)


def test_cascade_revocation_unwinds_bottom_up(auth):
    root, mid, leaf = chain(auth)
    req = auth.revoke(root.cap_id, 7)
    assert req.cascade and req.pending_acks == {"bob"}
    assert all(r.revoked_tick == 7 for r in (root, mid, leaf))
    assert root.state is TransientState.MIC and leaf.state is TransientState.EIA
    assert auth.resolve_transients(7) == []
    auth.acknowledge("carol", leaf.cap_id)
    resolved = auth.resolve_transients(8)
    assert resolved == [leaf.cap_id, mid.cap_id, root.cap_id]
    assert all(r.state is AuthState.I for r in (root, mid, leaf))


def test_double_revoke(auth):
    pool = auth.grant("alice", {"pool.read"})
    auth.revoke(pool.cap_id, 3)
    with pytest.raises(AlreadyRevoked):
        auth.revoke(pool.cap_id, 4)
    with pytest.raises(AlreadyRevoked):
        pool.mark_revoked(9)
    assert pool.revoked_tick == 3
    assert not pool.revoked_at(2) and pool.revoked_at(3)


def test_take_pending_clears_queue(auth):
    pool = auth.grant("alice", {"pool.read"})
    auth.revoke(pool.cap_id, 1)
    reqs = auth.take_pending()
    assert [r.cap_id for r in reqs] == [pool.cap_id] and reqs[0].broadcast
    assert auth.take_pending() == []


def test_trust_decay_trips_on_second_anomalous_tick():
    ts = TrustScore("a", threshold_tau=0.4, decay=0.5)
    assert ts.observe(True) == 0.5 and not ts.below_threshold
    assert ts.observe(True) == 0.25 and ts.below_threshold


def test_trust_recovers_linearly_and_caps():
    ts = TrustScore("a", 0.4, 0.5, score=0.5)
    assert ts.observe(False) == pytest.approx(0.55)
    ts.score = 0.99
    assert ts.observe(False) == 1.0


def test_update_trust_revokes_everything_from_next_tick(auth):
    a = auth.grant("alice", {"x"}, Mode.EXCLUSIVE)
    b = auth.grant("alice", {"pool.read"})
    auth.update_trust("alice", 12, 0.7, 50)
    assert a.revoked_tick is None
    auth.update_trust("alice", 12, 0.7, 51)
    assert a.revoked_tick == 52 and b.revoked_tick == 52
    assert {r.trigger for r in auth.take_pending()} == {"trust"}


def test_normal_rate_is_not_anomalous(auth):
    auth.grant("alice", {"x"})
    for t in range(20):
        auth.update_trust("alice", 1, 0.7, t)
    assert auth.trust["alice"].score == 1.0


@pytest.mark.parametrize("n, mode", [(10, BroadcastMode.SNOOPING), (25, BroadcastMode.SNOOPING), (26, BroadcastMode.DIRECTORY)])
def test_broadcast_mode(n, mode):
    assert select_broadcast_mode(n) is mode


def test_acquire_grant_and_refusal():
    auth = Authority(StrategyKind.LEASE, StrategyParams(ttl_ticks=10))
    auth.register_agent("a")
    rec = auth.grant("a", {"x"})
    reply = auth.process_acquire("a", rec.cap_id, 4)
    assert reply.granted and reply.lease_expiry_tick == 14 and reply.budget_n is None
    auth.revoke(rec.cap_id, 5)
    assert not auth.process_acquire("a", rec.cap_id, 6).granted


def test_single_modified_holder_per_name(auth):
    chain(auth)
    assert all(c == 1 for c in auth.modified_holders().values())
