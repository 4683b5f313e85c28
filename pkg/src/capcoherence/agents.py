"""Agent-side credential views and per-strategy local behaviour.

An ``AgentView`` is an agent's cached copy of one capability.  It can be
stale: the authority may have revoked the capability while the view still
believes it valid.  Every operation attempted on a stale-but-usable view is
an unauthorized operation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

from .authority import AcquireReply, Authority, Mode
from .coherence import AuthEvent, AuthState, Op, State, TransientState, effective_ops, transition
from .errors import InvalidTransition
from .strategies import StrategyKind, StrategyParams


class Outcome(str, enum.Enum):
    EXECUTED = "executed"
    EXECUTED_UNAUTHORIZED = "executed_unauthorized"
    BLOCKED = "blocked"


class MessageKind(str, enum.Enum):
    REVOCATION = "revocation"
    ACQUIRE_REPLY = "acquire_reply"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    recipient: str
    cap_id: str
    send_tick: int
    deliver_tick: int
    reply: AcquireReply | None = None


@dataclass(frozen=True)
class AgentProfile:
    """How often an agent acts: ``velocity_v`` ops per tick, or one op with
    probability ``action_probability_p``.  From ``burst_start_tick`` on an
    anomalous agent acts at ``burst_rate`` regardless."""

    agent: str
    velocity_v: int | None = None
    action_probability_p: float | None = None
    burst_rate: int | None = None
    burst_start_tick: int | None = None

    @property
    def expected_rate(self) -> float:
        if self.velocity_v is not None:
            return float(self.velocity_v)
        return float(self.action_probability_p or 0.0)

    @property
    def peak_rate(self) -> int:
        base = self.velocity_v if self.velocity_v is not None else 1
        return max(base, self.burst_rate or 0)


def determine_action_count(profile: AgentProfile, scenario, tick: int, draw: float) -> int:
    """Number of operations ``profile`` attempts during ``tick``.

    ``draw`` is this agent's uniform variate for the tick.  It is always
    consumed, so the generator advances identically whatever the action
    model; deterministic and bursting agents simply ignore it.
    """
    if profile.burst_rate is not None and profile.burst_start_tick is not None:
        if tick >= profile.burst_start_tick:
            return profile.burst_rate
    if profile.velocity_v is not None:
        return profile.velocity_v
    return 1 if draw < profile.action_probability_p else 0


@dataclass
class AgentView:
    agent: str
    cap_id: str
    believed_state: State
    kind: StrategyKind
    mode: Mode = Mode.SHARED
    issued_tick: int = 0
    budget_remaining: int | None = None
    lease_expiry_tick: int | None = None
    last_check_tick: int | None = None
    check_interval: int | None = None
    velocity_v: int | None = None
    action_probability_p: float | None = None
    invalidated_tick: int | None = None
    awaiting_grant: bool = False
    revalidations: int = 0
    checks: int = 0
    renewals: int = 0

    @property
    def usable(self) -> bool:
        if self.believed_state is AuthState.I or self.awaiting_grant:
            return False
        if self.budget_remaining is not None and self.budget_remaining <= 0:
            return False
        return True

    def permits(self, op: Op, tick: int) -> bool:
        if not self.usable:
            return False
        if self.lease_expiry_tick is not None and tick >= self.lease_expiry_tick:
            return False
        return op in effective_ops(self.believed_state)


def new_view(
    agent: str,
    cap_id: str,
    state: State,
    kind: StrategyKind,
    params: StrategyParams,
    tick: int = 0,
    mode: Mode = Mode.SHARED,
    profile: AgentProfile | None = None,
) -> AgentView:
    kind = StrategyKind(kind)
    view = AgentView(agent, cap_id, state, kind, mode=mode, issued_tick=tick)
    if kind is StrategyKind.RCC:
        view.budget_remaining = params.budget_n
    elif kind is StrategyKind.LEASE:
        view.lease_expiry_tick = tick + params.ttl_ticks
    elif kind is StrategyKind.LAZY:
        view.check_interval = params.check_interval_ticks
        view.last_check_tick = tick
    if profile is not None:
        view.velocity_v = profile.velocity_v
        view.action_probability_p = profile.action_probability_p
    return view


def drop_to_invalid(state: State, cause: AuthEvent) -> State:
    """Walk a cached copy to I through valid transitions only.

    Expiry and exhaustion have direct rows only from S.  An exclusive or
    delegating copy that drops on its own takes the revocation route its
    state dictates, completed locally.
    """
    if state is AuthState.I:
        return state
    if isinstance(state, TransientState):
        return transition(state, state.awaits) if state.target is AuthState.I else AuthState.I
    try:
        nxt = transition(state, cause)
    except InvalidTransition:
        nxt = transition(state, AuthEvent.REVOKE_CASCADE if state is AuthState.M else AuthEvent.REVOKE)
    if isinstance(nxt, TransientState):
        nxt = transition(nxt, nxt.awaits)
    return nxt


def _invalidate(view: AgentView, cause: AuthEvent, tick: int) -> None:
    view.believed_state = drop_to_invalid(view.believed_state, cause)
    if view.invalidated_tick is None:
        view.invalidated_tick = tick


def _acquire(view: AgentView, tick: int, authority: Authority) -> AcquireReply:
    """Exhaustion acquire, answered within the tick."""
    view.revalidations += 1
    reply = authority.process_acquire(view.agent, view.cap_id, tick)
    if reply.granted:
        view.budget_remaining = reply.budget_n
    else:
        _invalidate(view, AuthEvent.EXHAUST, tick)
        authority.acknowledge(view.agent, view.cap_id)
    return reply


def attempt_operation(
    view: AgentView, tick: int, authority: Authority, op: Op = Op.READ
) -> Outcome:
    """Try one operation on ``view`` during ``tick``.

    Classification uses the authority's ground truth at attempt time.  An RCC
    view that spends its last unit of budget acquires immediately.
    """
    if not view.permits(op, tick):
        return Outcome.BLOCKED
    rec = authority.record(view.cap_id)
    outcome = Outcome.EXECUTED_UNAUTHORIZED if rec.revoked_at(tick) else Outcome.EXECUTED
    if view.budget_remaining is not None:
        view.budget_remaining -= 1
        if view.budget_remaining == 0:
            _acquire(view, tick, authority)
    return outcome


def attempt_batch(
    view: AgentView, count: int, tick: int, authority: Authority, op: Op = Op.READ
) -> tuple[int, int, int]:
    """``count`` consecutive attempts; returns (executed, unauthorized, blocked).

    Same result as calling ``attempt_operation`` ``count`` times, but walks
    budget segments instead of single operations.
    """
    executed = unauthorized = 0
    remaining = count
    rec = authority.record(view.cap_id)
    revoked = rec.revoked_at(tick)
    while remaining > 0 and view.permits(op, tick):
        chunk = remaining if view.budget_remaining is None else min(remaining, view.budget_remaining)
        executed += chunk
        if revoked:
            unauthorized += chunk
        remaining -= chunk
        if view.budget_remaining is not None:
            view.budget_remaining -= chunk
            if view.budget_remaining == 0:
                _acquire(view, tick, authority)
    return executed, unauthorized, remaining


Send = Callable[[Message], None]


def _request(view: AgentView, tick: int, authority: Authority, latency: int, send: Send) -> None:
    reply = authority.process_acquire(view.agent, view.cap_id, tick)
    send(Message(MessageKind.ACQUIRE_REPLY, view.agent, view.cap_id, tick, tick + latency, reply))


def strategy_tick_hooks(
    view: AgentView, tick: int, authority: Authority, params: StrategyParams, send: Send
) -> list[str]:
    """Local strategy behaviour at the start of ``tick``; returns what happened.

    lease  expiry drops the view to I and asks for a fresh grant
    lazy   every ``check_interval`` ticks after issue, a check-on-use request
           whose answer lands ``revalidation_ticks`` later
    rcc    nothing here: exhaustion is handled inside the attempt
    eager  nothing here: invalidation arrives as a message
    """
    actions: list[str] = []
    if view.kind is StrategyKind.LEASE:
        if (
            view.lease_expiry_tick is not None
            and tick >= view.lease_expiry_tick
            and view.believed_state is not AuthState.I
        ):
            _invalidate(view, AuthEvent.EXPIRE, tick)
            actions.append("expire")
            view.renewals += 1
            view.awaiting_grant = True
            _request(view, tick, authority, params.revalidation_ticks, send)
            actions.append("renew")
    elif view.kind is StrategyKind.LAZY:
        elapsed = tick - view.issued_tick
        if (
            view.believed_state is not AuthState.I
            and elapsed > 0
            and elapsed % view.check_interval == 0
        ):
            view.checks += 1
            view.last_check_tick = tick
            _request(view, tick, authority, params.revalidation_ticks, send)
            actions.append("check")
    return actions


def handle_message(view: AgentView, message: Message, tick: int, authority: Authority) -> str | None:
    """Apply a delivered message; ``tick`` is the first tick it is in force.

    Returns "ack" when the agent acknowledged a revocation.
    """
    if message.kind is MessageKind.REVOCATION:
        _invalidate(view, AuthEvent.REVOKE, tick)
        view.awaiting_grant = False
        authority.acknowledge(view.agent, view.cap_id)
        return "ack"
    reply = message.reply
    if not reply.granted:
        _invalidate(view, AuthEvent.EXPIRE if view.kind is StrategyKind.LEASE else AuthEvent.REVOKE, tick)
        view.awaiting_grant = False
        authority.acknowledge(view.agent, view.cap_id)
        return "ack"
    if view.awaiting_grant:
        event = AuthEvent.GRANT_EXCLUSIVE if view.mode is Mode.EXCLUSIVE else AuthEvent.GRANT_SHARED
        view.believed_state = transition(AuthState.I, event)
        view.awaiting_grant = False
        view.invalidated_tick = None
    if reply.budget_n is not None and view.kind is StrategyKind.RCC:
        view.budget_remaining = reply.budget_n
    if reply.lease_expiry_tick is not None and view.kind is StrategyKind.LEASE:
        view.lease_expiry_tick = reply.lease_expiry_tick
    return None
