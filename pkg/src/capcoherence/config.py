"""Scenario config files.

A config is a flat YAML mapping using the scenario parameter names::

    agents: 1
    delegation_depth: 1
    action_model: deterministic 100     # or: bernoulli 0.5
    seeds: 0..9                         # or a list
    network_latency_ticks: 5
    revocation_trigger: 0               # a tick, or: trust
    ttl_ticks: 60
    exec_count_n: 50
    lazy_check_interval: 23
    anomaly_burst: null                 # ops/tick, with anomaly_start_tick
    trust_threshold: 0.8
    trust_decay: 0.3
    duration_ticks: 120

``name`` and ``anomaly_start_tick`` are the only optional keys.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

import yaml

from .engine import TRUST_TRIGGER, ActionModel, ScenarioConfig
from .errors import ParseError, UnknownKey

REQUIRED_KEYS = (
    "agents",
    "delegation_depth",
    "action_model",
    "seeds",
    "network_latency_ticks",
    "revocation_trigger",
    "ttl_ticks",
    "exec_count_n",
    "lazy_check_interval",
    "anomaly_burst",
    "trust_threshold",
    "trust_decay",
    "duration_ticks",
)
OPTIONAL_KEYS = ("name", "anomaly_start_tick")

BUNDLED = ("banking", "crm", "anomaly")

_SEED_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def bundled_config_path(name: str) -> Path:
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario {name!r}; have {BUNDLED}")
    return Path(str(resources.files("capcoherence") / "scenarios" / f"{name}.yaml"))


def parse_seeds(value) -> tuple[int, ...]:
    if isinstance(value, int) and not isinstance(value, bool):
        return (value,)
    if isinstance(value, list):
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in value):
            raise ValueError("seed list must hold integers")
        return tuple(value)
    m = _SEED_RANGE.match(str(value))
    if not m:
        raise ValueError(f"seeds must look like 'a..b' or a list, got {value!r}")
    lo, hi = int(m.group(1)), int(m.group(2))
    if hi < lo:
        raise ValueError("empty seed range")
    return tuple(range(lo, hi + 1))


def _int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _float(value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _action_model(value) -> ActionModel:
    parts = str(value).split()
    if len(parts) != 2 or parts[0] not in ("deterministic", "bernoulli"):
        raise ValueError("expected 'deterministic <ops/tick>' or 'bernoulli <p>'")
    return ActionModel(parts[0], float(parts[1]))


def _trigger(value):
    if value == TRUST_TRIGGER:
        return TRUST_TRIGGER
    return _int(value)


def _optional_int(value):
    return None if value is None else _int(value)


_CONVERT = {
    "agents": ("agent_count", _int),
    "delegation_depth": ("delegation_depth", _int),
    "action_model": ("action_model", _action_model),
    "seeds": ("seeds", parse_seeds),
    "network_latency_ticks": ("network_latency_ticks", _int),
    "revocation_trigger": ("revocation_trigger", _trigger),
    "ttl_ticks": ("ttl_ticks", _int),
    "exec_count_n": ("budget_n", _int),
    "lazy_check_interval": ("check_interval_ticks", _int),
    "anomaly_burst": ("anomaly_burst_rate", _optional_int),
    "trust_threshold": ("trust_threshold_tau", _float),
    "trust_decay": ("trust_decay", _float),
    "duration_ticks": ("duration_ticks", _int),
    "anomaly_start_tick": ("anomaly_start_tick", _optional_int),
    "name": ("name", str),
}


def parse_config(text: str, default_name: str = "scenario") -> ScenarioConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], line=mark.line + 1 if mark else None) from None
    if node is None or not isinstance(node, yaml.MappingNode):
        raise ParseError("config must be a flat key: value mapping", line=1)

    fields: dict = {"name": default_name}
    seen: set[str] = set()
    for key_node, value_node in node.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key in seen:
            raise ParseError("duplicate key", line=line, key=key)
        seen.add(key)
        if key not in _CONVERT:
            raise UnknownKey("unknown key", line=line, key=key)
        if not isinstance(value_node, (yaml.ScalarNode, yaml.SequenceNode)):
            raise ParseError("nested values are not allowed", line=line, key=key)
        value = yaml.SafeLoader(yaml.serialize(value_node)).get_single_data()
        target, convert = _CONVERT[key]
        try:
            fields[target] = convert(value)
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), line=line, key=key) from None

    missing = [k for k in REQUIRED_KEYS if k not in seen]
    if missing:
        raise ParseError(f"missing required key(s): {', '.join(missing)}", key=missing[0])
    config = ScenarioConfig(**fields)
    config.validate()
    return config


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), default_name=path.stem)


def dump_config(config: ScenarioConfig) -> str:
    seeds = config.seeds
    if seeds == tuple(range(seeds[0], seeds[-1] + 1)):
        seeds_text = f"{seeds[0]}..{seeds[-1]}"
    else:
        seeds_text = "[" + ", ".join(map(str, seeds)) + "]"
    burst = "null" if config.anomaly_burst_rate is None else str(config.anomaly_burst_rate)
    lines = [
        f"name: {config.name}",
        f"agents: {config.agent_count}",
        f"delegation_depth: {config.delegation_depth}",
        f"action_model: {config.action_model}",
        f"seeds: {seeds_text}",
        f"network_latency_ticks: {config.network_latency_ticks}",
        f"revocation_trigger: {config.revocation_trigger}",
        f"ttl_ticks: {config.ttl_ticks}",
        f"exec_count_n: {config.budget_n}",
        f"lazy_check_interval: {config.check_interval_ticks}",
        f"anomaly_burst: {burst}",
    ]
    if config.anomaly_start_tick is not None:
        lines.append(f"anomaly_start_tick: {config.anomaly_start_tick}")
    lines += [
        f"trust_threshold: {config.trust_threshold_tau!r}",
        f"trust_decay: {config.trust_decay!r}",
        f"duration_ticks: {config.duration_ticks}",
    ]
    return "\n".join(lines) + "\n"


def write_config(config: ScenarioConfig, path) -> None:
    Path(path).write_text(dump_config(config), encoding="utf-8")
