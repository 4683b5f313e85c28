"""Per-tick records, per-run metrics and cross-seed aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .strategies import StrategyKind, StrategyParams, predicted_bound

TRACE_SCHEMA = 1


@dataclass(frozen=True)
class TickRecord:
    tick: int
    # agent -> (attempts, executed, unauthorized, blocked)
    agents: dict[str, tuple[int, int, int, int]]
    in_flight: int
    # cap_id -> (believed state at tick close, ops executed on it this tick)
    views: dict[str, tuple[str, int]]


@dataclass
class RunTrace:
    scenario: str
    strategy: str
    seed: int
    duration_ticks: int
    records: list[TickRecord]
    revocations: dict[str, int]  # cap_id -> revoked_tick
    holders: dict[str, str]  # cap_id -> agent
    draws: int = 0

    def peak_velocity(self, agent: str) -> int:
        return max((r.agents[agent][0] for r in self.records if agent in r.agents), default=0)


def post_revocation_ops(trace: RunTrace) -> dict[str, int]:
    """Operations executed on each revoked capability from its revocation tick on."""
    out = {cap_id: 0 for cap_id in trace.revocations}
    for rec in trace.records:
        for cap_id, revoked in trace.revocations.items():
            if rec.tick >= revoked and cap_id in rec.views:
                out[cap_id] += rec.views[cap_id][1]
    return out


def unauthorized_from_trace(trace: RunTrace) -> int:
    """Recount unauthorized operations by folding the trace."""
    return sum(post_revocation_ops(trace).values())


def cascade_completeness(trace: RunTrace) -> float:
    """Fraction of revoked capabilities whose holder's view ended in I.

    A run with nothing revoked is vacuously complete.
    """
    if not trace.revocations:
        return 1.0
    final = trace.records[-1].views if trace.records else {}
    done = sum(1 for cap_id in trace.revocations if final.get(cap_id, ("I", 0))[0] == "I")
    return done / len(trace.revocations)


def check_bound_violation(trace: RunTrace, strategy: StrategyKind, params: StrategyParams) -> int:
    """Number of capabilities whose post-revocation ops exceed the strategy's bound.

    Velocity is the holder's peak attempts per tick over the run.
    """
    count = 0
    for cap_id, ops in post_revocation_ops(trace).items():
        v = trace.peak_velocity(trace.holders[cap_id])
        if ops > predicted_bound(strategy, params, v):
            count += 1
    return count


# --- trace export ---------------------------------------------------------


def trace_lines(trace: RunTrace) -> Iterator[str]:
    """Line-delimited JSON, one object per tick, fixed field order."""
    for rec in trace.records:
        obj = {
            "schema": TRACE_SCHEMA,
            "scenario": trace.scenario,
            "strategy": trace.strategy,
            "seed": trace.seed,
            "tick": rec.tick,
            "in_flight": rec.in_flight,
            "agents": [[a, *rec.agents[a]] for a in sorted(rec.agents)],
            "views": [[c, *rec.views[c]] for c in sorted(rec.views)],
        }
        yield json.dumps(obj, separators=(",", ":"))


def write_trace(trace: RunTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in trace_lines(trace):
            fh.write(line + "\n")


# --- aggregation ----------------------------------------------------------


@dataclass(frozen=True)
class MetricStats:
    mean: float
    sigma: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Iterable[float]) -> "MetricStats":
        arr = np.asarray(list(values), dtype=float)
        if arr.size == 0:
            raise ValueError("no values to aggregate")
        if np.all(arr == arr[0]):
            return cls(float(arr[0]), 0.0, float(arr[0]), float(arr[0]))
        return cls(float(arr.mean()), float(arr.std(ddof=0)), float(arr.min()), float(arr.max()))


@dataclass
class AggregateMetrics:
    strategy: str
    scenario: str
    seeds: tuple[int, ...]
    stats: dict[str, MetricStats]
    per_capability_max: dict[str, int] = field(default_factory=dict)
    runs: list = field(default_factory=list, repr=False)

    def __getitem__(self, metric: str) -> MetricStats:
        return self.stats[metric]

    def mean(self, metric: str) -> float:
        return self.stats[metric].mean

    def sigma(self, metric: str) -> float:
        return self.stats[metric].sigma


def aggregate(results: list, strategy: str, scenario: str) -> AggregateMetrics:
    """Fold run results (in seed order) into mean, population sigma, min, max."""
    if not results:
        raise ValueError("no runs to aggregate")
    names = results[0].METRICS
    stats = {m: MetricStats.of(r.metrics()[m] for r in results) for m in names}
    per_cap: dict[str, int] = {}
    for r in results:
        for cap_id, ops in r.per_capability.items():
            per_cap[cap_id] = max(per_cap.get(cap_id, 0), ops)
    return AggregateMetrics(
        strategy=strategy,
        scenario=scenario,
        seeds=tuple(r.seed for r in results),
        stats=stats,
        per_capability_max=per_cap,
        runs=list(results),
    )
