"""Revocation strategies and their closed-form damage bounds."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import MissingParam, UnknownContext


class StrategyKind(str, enum.Enum):
    EAGER = "eager"
    LAZY = "lazy"
    LEASE = "lease"
    RCC = "rcc"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class StrategyParams:
    network_latency_ticks: int = 0
    revalidation_ticks: int = 1
    ttl_ticks: int | None = None
    budget_n: int | None = None
    check_interval_ticks: int | None = None

    def require(self, kind: StrategyKind) -> None:
        """Raise MissingParam unless the fields ``kind`` depends on are set."""
        need = {
            StrategyKind.LEASE: ("ttl_ticks",),
            StrategyKind.RCC: ("budget_n",),
            StrategyKind.LAZY: ("check_interval_ticks",),
            StrategyKind.EAGER: (),
        }[StrategyKind(kind)]
        for name in need:
            value = getattr(self, name)
            if value is None or value <= 0:
                raise MissingParam(f"{kind} needs a positive {name}, got {value!r}")
        if self.network_latency_ticks < 0 or self.revalidation_ticks < 0:
            raise MissingParam("latencies must be nonnegative")


def predicted_bound(kind: StrategyKind, params: StrategyParams, v: float) -> float:
    """Worst-case unauthorized operations on one capability after revocation.

    eager  v * network latency
    lazy   v * (revalidation + check interval)
    lease  v * TTL
    rcc    n, whatever the velocity
    """
    kind = StrategyKind(kind)
    params.require(kind)
    if kind is StrategyKind.EAGER:
        return v * params.network_latency_ticks
    if kind is StrategyKind.LAZY:
        return v * (params.revalidation_ticks + params.check_interval_ticks)
    if kind is StrategyKind.LEASE:
        return v * params.ttl_ticks
    return params.budget_n


def velocity_vulnerability(v: float, ttl: float) -> float:
    if v < 0 or ttl < 0:
        raise ValueError("velocity and ttl must be nonnegative")
    return v * ttl


def rcc_overhead(revalidation_ticks: float, n: int) -> float:
    """Fraction of operations that pay a revalidation round trip."""
    if n <= 0:
        raise ValueError("budget n must be positive")
    return revalidation_ticks / n


_CONTEXT_STRATEGY = {
    "financial": StrategyKind.EAGER,
    "crm_bulk": StrategyKind.LEASE,
    "analytics": StrategyKind.LAZY,
    "high_velocity_api": StrategyKind.RCC,
}


def assign_strategy(agent_context: str) -> StrategyKind:
    try:
        return _CONTEXT_STRATEGY[agent_context]
    except KeyError:
        raise UnknownContext(
            f"unknown agent context {agent_context!r}; expected one of {sorted(_CONTEXT_STRATEGY)}"
        ) from None
