"""Tick-based simulation engine.

Each tick runs six phases in a fixed order:

1. agent operations (strategy hooks, attempts, RCC exhaustion acquires)
2. authority processing of queued revocations
3. network delivery
4. anomaly detection by the trust scorer
5. resolution of authority-side transient states on received acks
6. metrics recording

Messages carry a ``deliver_tick``; phase 3 of tick ``t`` hands over everything
due by the boundary into ``t + 1``, so a message is in force for the whole of
its delivery tick.  A revocation sent at tick 0 with latency 5 therefore
leaves ticks 0-4 exposed and is in force from tick 5.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .agents import (
    AgentProfile,
    AgentView,
    Message,
    MessageKind,
    attempt_batch,
    determine_action_count,
    handle_message,
    new_view,
    strategy_tick_hooks,
)
from .authority import Authority, Mode
from .coherence import AuthState, Op
from .errors import ConfigInvalid
from .metrics import (
    AggregateMetrics,
    RunTrace,
    TickRecord,
    aggregate,
    cascade_completeness,
    check_bound_violation,
    post_revocation_ops,
)
from .strategies import StrategyKind, StrategyParams

TRUST_TRIGGER = "trust"


@dataclass(frozen=True)
class ActionModel:
    kind: str  # "deterministic" or "bernoulli"
    value: float

    def __post_init__(self):
        if self.kind not in ("deterministic", "bernoulli"):
            raise ConfigInvalid(f"unknown action model {self.kind!r}")

    def __str__(self) -> str:
        value = int(self.value) if self.kind == "deterministic" else self.value
        return f"{self.kind} {value}"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    agent_count: int
    delegation_depth: int
    action_model: ActionModel
    seeds: tuple[int, ...]
    network_latency_ticks: int
    revocation_trigger: int | str  # explicit tick, or "trust"
    ttl_ticks: int
    budget_n: int
    check_interval_ticks: int
    trust_threshold_tau: float
    trust_decay: float
    duration_ticks: int
    anomaly_burst_rate: int | None = None
    anomaly_start_tick: int | None = None
    revalidation_ticks: int = 1

    def validate(self) -> "ScenarioConfig":
        problems = []
        if self.duration_ticks <= 0:
            problems.append("duration_ticks must be positive")
        if not self.seeds:
            problems.append("seeds must be nonempty")
        if self.agent_count < 1:
            problems.append("agents must be at least 1")
        if not 1 <= self.delegation_depth <= self.agent_count:
            problems.append("delegation_depth must be between 1 and agents")
        if self.network_latency_ticks < 0 or self.revalidation_ticks < 0:
            problems.append("latencies must be nonnegative")
        for key in ("ttl_ticks", "budget_n", "check_interval_ticks"):
            if getattr(self, key) <= 0:
                problems.append(f"{key} must be positive")
        for key in ("trust_threshold_tau", "trust_decay"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                problems.append(f"{key} must lie in [0, 1]")
        model = self.action_model
        if model.kind == "bernoulli" and not 0.0 <= model.value <= 1.0:
            problems.append("bernoulli probability must lie in [0, 1]")
        if model.kind == "deterministic" and (model.value < 0 or model.value != int(model.value)):
            problems.append("deterministic velocity must be a nonnegative integer")
        trig = self.revocation_trigger
        if not (trig == TRUST_TRIGGER or (isinstance(trig, int) and trig >= 0)):
            problems.append(f"revocation_trigger must be a tick or {TRUST_TRIGGER!r}")
        if (self.anomaly_burst_rate is None) != (self.anomaly_start_tick is None):
            problems.append("anomaly burst rate and start tick go together")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    @property
    def params(self) -> StrategyParams:
        return StrategyParams(
            network_latency_ticks=self.network_latency_ticks,
            revalidation_ticks=self.revalidation_ticks,
            ttl_ticks=self.ttl_ticks,
            budget_n=self.budget_n,
            check_interval_ticks=self.check_interval_ticks,
        )

    @property
    def deterministic(self) -> bool:
        return self.action_model.kind == "deterministic"

    def with_velocity(self, v: int) -> "ScenarioConfig":
        return replace(self, action_model=ActionModel("deterministic", v))


class ActionStream:
    """Per-run PCG64 stream (numpy) with a fixed draw discipline.

    ``tick_draws`` returns one uniform variate per agent in ascending agent
    order; nothing else in the engine touches the generator.
    """

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.PCG64(seed))
        self.count = 0

    def tick_draws(self, agent_count: int) -> np.ndarray:
        self.count += agent_count
        return self._gen.random(agent_count)


def rng_stream(seed: int) -> ActionStream:
    return ActionStream(seed)


class Network:
    """Latency-delayed queue; delivery in deliver_tick order, FIFO within a tick."""

    def __init__(self):
        self._heap: list[tuple[int, int, Message]] = []
        self._seq = itertools.count()
        self.sent = 0
        self.delivered = 0

    def send(self, msg: Message) -> None:
        if msg.deliver_tick < msg.send_tick:
            raise ValueError("message cannot arrive before it is sent")
        heapq.heappush(self._heap, (msg.deliver_tick, next(self._seq), msg))
        self.sent += 1

    def due(self, boundary: int) -> list[Message]:
        out = []
        while self._heap and self._heap[0][0] <= boundary:
            out.append(heapq.heappop(self._heap)[2])
        self.delivered += len(out)
        return out

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class RunResult:
    seed: int
    unauthorized_ops: int
    staleness_max_ticks: int
    messages_sent: int
    revalidation_count: int
    bound_violations: int
    cascade_completeness: float
    trace: RunTrace = field(repr=False)
    broadcast_messages: int = 0
    lazy_checks: int = 0
    lease_renewals: int = 0
    per_capability: dict[str, int] = field(default_factory=dict)

    METRICS = (
        "unauthorized_ops",
        "staleness_max_ticks",
        "messages_sent",
        "revalidation_count",
        "bound_violations",
        "cascade_completeness",
    )

    def metrics(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in self.METRICS}


@dataclass
class World:
    authority: Authority
    profiles: list[AgentProfile]
    views: dict[str, list[AgentView]]  # agent -> views, grant order
    root_cap: str

    def view(self, agent: str, cap_id: str) -> AgentView | None:
        for v in self.views.get(agent, ()):
            if v.cap_id == cap_id:
                return v
        return None


_SCOPE_WORDS = ("read", "write", "transfer", "approve", "admin")


def _chain_scope(depth: int, level: int) -> set[str]:
    words = list(_SCOPE_WORDS) + [f"op{i}" for i in range(len(_SCOPE_WORDS), depth)]
    return {f"svc.{w}" for w in words[: depth - level]}


def build_world(config: ScenarioConfig, kind: StrategyKind) -> World:
    """Agents a0..a{n-1}.  a0 holds an exclusive grant and delegates down a
    chain of ``delegation_depth`` agents with shrinking scope; everyone else
    shares one pooled read capability.  a0 is the anomalous agent when the
    scenario has a burst."""
    kind = StrategyKind(kind)
    params = config.params
    authority = Authority(kind, params)
    agents = [f"a{i}" for i in range(config.agent_count)]
    profiles = []
    for i, agent in enumerate(agents):
        authority.register_agent(agent, config.trust_threshold_tau, config.trust_decay)
        model = config.action_model
        profiles.append(
            AgentProfile(
                agent,
                velocity_v=int(model.value) if model.kind == "deterministic" else None,
                action_probability_p=model.value if model.kind == "bernoulli" else None,
                burst_rate=config.anomaly_burst_rate if i == 0 else None,
                burst_start_tick=config.anomaly_start_tick if i == 0 else None,
            )
        )

    depth = config.delegation_depth
    root = authority.grant(agents[0], _chain_scope(depth, 0), Mode.EXCLUSIVE, params, 0, "svc")
    modes = {root.cap_id: Mode.EXCLUSIVE}
    parent = root
    for level in range(1, depth):
        parent = authority.delegate(parent.cap_id, agents[level], _chain_scope(depth, level), 0)
        modes[parent.cap_id] = Mode.EXCLUSIVE
    for agent in agents[depth:]:
        rec = authority.grant(agent, {"pool.read"}, Mode.SHARED, params, 0, "pool")
        modes[rec.cap_id] = Mode.SHARED

    by_agent = {p.agent: p for p in profiles}
    views: dict[str, list[AgentView]] = {a: [] for a in agents}
    for rec in authority.records.values():
        views[rec.holder].append(
            new_view(rec.holder, rec.cap_id, rec.state, kind, params, 0, modes[rec.cap_id], by_agent[rec.holder])
        )
    return World(authority, profiles, views, root.cap_id)


def _target_view(views: list[AgentView], tick: int) -> AgentView | None:
    for v in views:
        if v.permits(Op.READ, tick):
            return v
    return views[0] if views else None


def run(config: ScenarioConfig, strategy_kind: StrategyKind | str, seed: int) -> RunResult:
    """One seeded run of ``config`` under ``strategy_kind``; a pure function."""
    config.validate()
    kind = StrategyKind(strategy_kind)
    params = config.params
    world = build_world(config, kind)
    authority = world.authority
    net = Network()
    rng = rng_stream(seed)
    agents = [p.agent for p in world.profiles]
    all_views = [v for a in agents for v in world.views[a]]
    records: list[TickRecord] = []
    messages_sent = broadcast_messages = 0
    unauthorized_live = 0

    for t in range(config.duration_ticks):
        if config.revocation_trigger == t:
            authority.revoke(world.root_cap, t)

        # phase 1: agent operations
        draws = rng.tick_draws(len(agents))
        agent_counts: dict[str, tuple[int, int, int, int]] = {}
        view_exec: dict[str, int] = {v.cap_id: 0 for v in all_views}
        attempts_by_agent: dict[str, int] = {}
        for profile, draw in zip(world.profiles, draws):
            agent = profile.agent
            for view in world.views[agent]:
                strategy_tick_hooks(view, t, authority, params, net.send)
            count = determine_action_count(profile, config, t, float(draw))
            attempts_by_agent[agent] = count
            target = _target_view(world.views[agent], t)
            if target is None:
                agent_counts[agent] = (count, 0, 0, count)
                continue
            executed, unauth, blocked = attempt_batch(target, count, t, authority)
            view_exec[target.cap_id] += executed
            unauthorized_live += unauth
            agent_counts[agent] = (count, executed, unauth, blocked)

        # phase 2: authority processing
        for req in authority.take_pending():
            messages_sent += 1
            if kind is StrategyKind.EAGER:
                for recipient in authority.broadcast_recipients(req):
                    net.send(
                        Message(
                            MessageKind.REVOCATION, recipient, req.cap_id, t,
                            t + config.network_latency_ticks,
                        )
                    )
                    broadcast_messages += 1

        # phase 3: network delivery
        for msg in net.due(t + 1):
            view = world.view(msg.recipient, msg.cap_id)
            if view is not None:
                handle_message(view, msg, max(msg.deliver_tick, t + 1), authority)

        # phase 4: anomaly detection
        for profile in world.profiles:
            authority.update_trust(profile.agent, attempts_by_agent[profile.agent], profile.expected_rate, t)

        # phase 5: transient resolution
        authority.resolve_transients(t)

        # phase 6: metrics
        swmr = authority.modified_holders()
        if any(c > 1 for c in swmr.values()):
            raise AssertionError(f"SWMR violated at tick {t}: {swmr}")
        records.append(
            TickRecord(
                tick=t,
                agents=agent_counts,
                in_flight=len(net),
                views={v.cap_id: (str(v.believed_state), view_exec[v.cap_id]) for v in all_views},
            )
        )

    revocations = {
        cap_id: rec.revoked_tick
        for cap_id, rec in authority.records.items()
        if rec.revoked_tick is not None
    }
    trace = RunTrace(
        scenario=config.name,
        strategy=kind.value,
        seed=seed,
        duration_ticks=config.duration_ticks,
        records=records,
        revocations=revocations,
        holders={cap_id: rec.holder for cap_id, rec in authority.records.items()},
        draws=rng.count,
    )
    per_cap = post_revocation_ops(trace)
    staleness = _staleness(world, revocations, config.duration_ticks)
    return RunResult(
        seed=seed,
        unauthorized_ops=unauthorized_live,
        staleness_max_ticks=max(staleness.values(), default=0),
        messages_sent=messages_sent,
        revalidation_count=sum(v.revalidations for v in all_views),
        bound_violations=check_bound_violation(trace, kind, params),
        cascade_completeness=cascade_completeness(trace),
        trace=trace,
        broadcast_messages=broadcast_messages,
        lazy_checks=sum(v.checks for v in all_views),
        lease_renewals=sum(v.renewals for v in all_views),
        per_capability=per_cap,
    )


def _staleness(world: World, revocations: dict[str, int], duration: int) -> dict[str, int]:
    """Ticks from revocation to local invalidation, per revoked capability.

    A view still valid at the end is charged up to the last tick it was
    observed stale.
    """
    out = {}
    for cap_id, revoked in revocations.items():
        holder = world.authority.records[cap_id].holder
        view = world.view(holder, cap_id)
        if view is None or revoked > duration - 1:
            continue
        if view.believed_state is AuthState.I and view.invalidated_tick is not None:
            out[cap_id] = max(0, view.invalidated_tick - revoked)
        else:
            out[cap_id] = (duration - 1) - revoked
    return out


def run_batch(
    config: ScenarioConfig,
    strategy_kind: StrategyKind | str,
    seeds: Sequence[int] | None = None,
) -> AggregateMetrics:
    """Run every seed independently and aggregate mean / population sigma."""
    seeds = tuple(config.seeds if seeds is None else seeds)
    results = [run(config, strategy_kind, s) for s in seeds]
    return aggregate(results, StrategyKind(strategy_kind).value, config.name)
