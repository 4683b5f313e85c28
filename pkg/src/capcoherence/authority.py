"""Authority service: capability registry, trust scorer, revocation broadcaster.

The authority holds ground truth.  Agents hold possibly stale copies (see
``agents``); the simulation engine moves information between the two.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .coherence import AuthEvent, AuthState, State, TransientState, transition
from .errors import (
    AlreadyRevoked,
    DuplicateExclusive,
    InvalidSourceState,
    ScopeEscalation,
    UnknownAgent,
    UnknownCapability,
)
from .strategies import StrategyKind, StrategyParams

SNOOPING_MAX_AGENTS = 25
TRUST_RECOVERY_PER_TICK = 0.05
ANOMALY_RATE_FACTOR = 2.0


class Mode(str, enum.Enum):
    SHARED = "shared"
    EXCLUSIVE = "exclusive"


class BroadcastMode(str, enum.Enum):
    SNOOPING = "snooping"
    DIRECTORY = "directory"


def select_broadcast_mode(agent_count: int) -> BroadcastMode:
    if agent_count < 1:
        raise ValueError("agent_count must be at least 1")
    if agent_count <= SNOOPING_MAX_AGENTS:
        return BroadcastMode.SNOOPING
    return BroadcastMode.DIRECTORY


@dataclass
class CapabilityRecord:
    cap_id: str
    name: str
    holder: str
    scope: frozenset[str]
    state: State
    issued_tick: int
    parent: str | None = None
    budget_n: int | None = None
    ttl_ticks: int | None = None
    children: list[str] = field(default_factory=list)
    _revoked_tick: int | None = field(default=None, repr=False)

    @property
    def revoked_tick(self) -> int | None:
        return self._revoked_tick

    def mark_revoked(self, tick: int) -> None:
        if self._revoked_tick is not None:
            raise AlreadyRevoked(f"{self.cap_id} already revoked at tick {self._revoked_tick}")
        self._revoked_tick = tick

    def revoked_at(self, tick: int) -> bool:
        """Ground truth as seen by an operation attempted during ``tick``."""
        return self._revoked_tick is not None and self._revoked_tick <= tick


@dataclass
class RevocationRequest:
    cap_id: str
    initiated_tick: int
    cascade: bool
    pending_acks: set[str]
    trigger: str = "explicit"
    broadcast: bool = False  # set once phase 2 has processed it
    resolved_tick: int | None = None


@dataclass
class TrustScore:
    agent: str
    threshold_tau: float
    decay: float
    score: float = 1.0

    def observe(self, anomalous: bool) -> float:
        if anomalous:
            self.score *= 1.0 - self.decay
        else:
            self.score = min(1.0, self.score + TRUST_RECOVERY_PER_TICK)
        self.score = min(1.0, max(0.0, self.score))
        return self.score

    @property
    def below_threshold(self) -> bool:
        return self.score < self.threshold_tau


@dataclass(frozen=True)
class AcquireReply:
    cap_id: str
    granted: bool
    tick: int
    budget_n: int | None = None
    lease_expiry_tick: int | None = None


class Authority:
    """Single-copy registry; every mutation comes from the simulation loop."""

    def __init__(self, kind: StrategyKind | None = None, params: StrategyParams | None = None):
        self.kind = StrategyKind(kind) if kind is not None else None
        self.params = params or StrategyParams()
        self.records: dict[str, CapabilityRecord] = {}
        self.requests: dict[str, RevocationRequest] = {}
        self.trust: dict[str, TrustScore] = {}
        self.pending: list[RevocationRequest] = []
        self._ids = itertools.count(1)

    # -- agents ---------------------------------------------------------

    def register_agent(self, agent: str, threshold_tau: float = 0.4, decay: float = 0.5) -> None:
        self.trust[agent] = TrustScore(agent, threshold_tau, decay)

    @property
    def agents(self) -> list[str]:
        return list(self.trust)

    def _require_agent(self, agent: str) -> None:
        if agent not in self.trust:
            raise UnknownAgent(agent)

    def record(self, cap_id: str) -> CapabilityRecord:
        try:
            return self.records[cap_id]
        except KeyError:
            raise UnknownCapability(cap_id) from None

    # -- registry -------------------------------------------------------

    def _strategy_fields(self, params: StrategyParams) -> dict:
        wants_budget = self.kind in (None, StrategyKind.RCC)
        wants_ttl = self.kind in (None, StrategyKind.LEASE)
        return {
            "budget_n": params.budget_n if wants_budget else None,
            "ttl_ticks": params.ttl_ticks if wants_ttl else None,
        }

    def _new_id(self) -> str:
        return f"cap-{next(self._ids):04d}"

    def grant(
        self,
        agent: str,
        scope: Iterable[str],
        mode: Mode | str = Mode.SHARED,
        params: StrategyParams | None = None,
        tick: int = 0,
        name: str | None = None,
    ) -> CapabilityRecord:
        self._require_agent(agent)
        scope = frozenset(scope)
        if not scope:
            raise ValueError("scope must be nonempty")
        mode = Mode(mode)
        name = name or "+".join(sorted(scope))
        if mode is Mode.EXCLUSIVE:
            for other in self.records.values():
                if other.name == name and other.revoked_tick is None and other.state in (
                    AuthState.E, AuthState.M, TransientState.EIA, TransientState.MIC,
                ):
                    raise DuplicateExclusive(f"{name} already held exclusively by {other.holder}")
            event = AuthEvent.GRANT_EXCLUSIVE
        else:
            event = AuthEvent.GRANT_SHARED
        rec = CapabilityRecord(
            cap_id=self._new_id(),
            name=name,
            holder=agent,
            scope=scope,
            state=transition(AuthState.I, event),
            issued_tick=tick,
            **self._strategy_fields(params or self.params),
        )
        self.records[rec.cap_id] = rec
        return rec

    def delegate(
        self, parent_cap: str, child_agent: str, child_scope: Iterable[str], tick: int = 0
    ) -> CapabilityRecord:
        parent = self.record(parent_cap)
        self._require_agent(child_agent)
        child_scope = frozenset(child_scope)
        if not child_scope:
            raise ValueError("scope must be nonempty")
        if not child_scope <= parent.scope:
            extra = sorted(child_scope - parent.scope)
            raise ScopeEscalation(f"{extra} not in parent scope of {parent_cap}")
        if parent.revoked_tick is not None or parent.state not in (AuthState.E, AuthState.M):
            raise InvalidSourceState(f"cannot delegate from {parent_cap} in state {parent.state}")
        if parent.state is AuthState.E:
            parent.state = transition(parent.state, AuthEvent.DELEGATE)
        child = CapabilityRecord(
            cap_id=self._new_id(),
            name=f"{parent.name}/{child_agent}",
            holder=child_agent,
            scope=child_scope,
            state=AuthState.E,
            issued_tick=tick,
            parent=parent.cap_id,
            budget_n=parent.budget_n,
            ttl_ticks=parent.ttl_ticks,
        )
        self.records[child.cap_id] = child
        parent.children.append(child.cap_id)
        return child

    def lineage(self, cap_id: str) -> list[CapabilityRecord]:
        """Records from the root grant down to ``cap_id``."""
        chain = []
        rec: CapabilityRecord | None = self.record(cap_id)
        while rec is not None:
            chain.append(rec)
            rec = self.records[rec.parent] if rec.parent else None
        return chain[::-1]

    def descendants(self, cap_id: str) -> Iterator[CapabilityRecord]:
        for child_id in self.record(cap_id).children:
            child = self.records[child_id]
            yield child
            yield from self.descendants(child_id)

    def holdings(self, agent: str) -> list[CapabilityRecord]:
        return [r for r in self.records.values() if r.holder == agent]

    def holders_of(self, cap_id: str) -> list[str]:
        rec = self.record(cap_id)
        return [rec.holder]

    # -- revocation -----------------------------------------------------

    def revoke(self, cap_id: str, tick: int, trigger: str = "explicit") -> RevocationRequest:
        """Revoke in ground truth and queue the request for phase-2 processing.

        A record in M is revoked by cascade: every descendant in the
        delegation tree is revoked at the same tick, and the root waits on
        its direct delegees.
        """
        rec = self.record(cap_id)
        if rec.revoked_tick is not None or rec.state is AuthState.I:
            raise AlreadyRevoked(f"{cap_id} is already revoked")
        if rec.state not in (AuthState.M, AuthState.E, AuthState.S):
            raise InvalidSourceState(f"cannot revoke {cap_id} in state {rec.state}")
        return self._revoke_one(rec, tick, trigger)

    def _revoke_one(self, rec: CapabilityRecord, tick: int, trigger: str) -> RevocationRequest:
        rec.mark_revoked(tick)
        cascade = rec.state is AuthState.M
        if cascade:
            rec.state = transition(rec.state, AuthEvent.REVOKE_CASCADE)
            pending = {self.records[c].holder for c in rec.children}
        else:
            rec.state = transition(rec.state, AuthEvent.REVOKE)
            pending = {rec.holder}
        req = RevocationRequest(rec.cap_id, tick, cascade, pending, trigger)
        self.requests[rec.cap_id] = req
        self.pending.append(req)
        if cascade:
            for child_id in rec.children:
                child = self.records[child_id]
                if child.revoked_tick is None and child.state in (
                    AuthState.M, AuthState.E, AuthState.S,
                ):
                    self._revoke_one(child, tick, trigger)
                else:
                    # already dead below us: nothing to wait for
                    req.pending_acks.discard(child.holder)
        return req

    def revoke_all(self, agent: str, tick: int, trigger: str = "trust") -> list[RevocationRequest]:
        out = []
        for rec in self.holdings(agent):
            try:
                out.append(self.revoke(rec.cap_id, tick, trigger))
            except (AlreadyRevoked, InvalidSourceState):
                continue
        return out

    def take_pending(self) -> list[RevocationRequest]:
        """Hand the queued requests to phase 2 and clear the queue."""
        out, self.pending = self.pending, []
        for req in out:
            req.broadcast = True
        return out

    def broadcast_recipients(self, req: RevocationRequest) -> list[str]:
        mode = select_broadcast_mode(max(1, len(self.trust)))
        if mode is BroadcastMode.SNOOPING:
            return self.agents
        return self.holders_of(req.cap_id)

    def acknowledge(self, agent: str, cap_id: str) -> None:
        """Record that ``agent`` has invalidated its copy of ``cap_id``."""
        req = self.requests.get(cap_id)
        if req is None or req.resolved_tick is not None:
            return
        if not req.cascade:
            req.pending_acks.discard(agent)

    def resolve_transients(self, tick: int) -> list[str]:
        """Complete every request whose acks are in; returns resolved cap ids.

        A resolved delegee counts as its parent's ack, so cascades unwind
        bottom-up within a single call.
        """
        resolved = []
        progress = True
        while progress:
            progress = False
            for req in self.requests.values():
                if req.resolved_tick is not None or req.pending_acks:
                    continue
                rec = self.records[req.cap_id]
                if not isinstance(rec.state, TransientState):
                    continue
                rec.state = transition(rec.state, rec.state.awaits)
                req.resolved_tick = tick
                resolved.append(req.cap_id)
                progress = True
                if rec.parent is not None:
                    parent_req = self.requests.get(rec.parent)
                    if parent_req is not None and parent_req.cascade:
                        parent_req.pending_acks.discard(rec.holder)
        return resolved

    # -- acquire --------------------------------------------------------

    def process_acquire(self, agent: str, cap_id: str, tick: int) -> AcquireReply:
        rec = self.record(cap_id)
        if rec.revoked_tick is not None:
            return AcquireReply(cap_id, False, tick)
        expiry = tick + rec.ttl_ticks if rec.ttl_ticks else None
        return AcquireReply(cap_id, True, tick, rec.budget_n, expiry)

    # -- trust ----------------------------------------------------------

    def update_trust(
        self, agent: str, observed_ops_this_tick: int, expected_rate: float, tick: int
    ) -> TrustScore:
        """Score one tick of behaviour; revoke everything the agent holds on a breach.

        An observation above twice the expected rate decays the score
        geometrically; anything else lets it recover linearly.  The
        observation closes ``tick``, so a triggered revocation is stamped
        ``tick + 1``: the first tick whose operations follow it.
        """
        self._require_agent(agent)
        ts = self.trust[agent]
        ts.observe(observed_ops_this_tick > ANOMALY_RATE_FACTOR * expected_rate)
        if ts.below_threshold:
            self.revoke_all(agent, tick + 1, trigger="trust")
        return ts

    # -- invariants -----------------------------------------------------

    def modified_holders(self) -> dict[str, int]:
        """Count of records in M per capability name."""
        counts: dict[str, int] = {}
        for rec in self.records.values():
            if rec.state is AuthState.M:
                counts[rec.name] = counts.get(rec.name, 0) + 1
        return counts
