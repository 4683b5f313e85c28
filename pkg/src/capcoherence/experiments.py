"""Batch experiments, result tables and bound comparisons."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .config import load_config
from .engine import ScenarioConfig, run_batch
from .metrics import MetricStats, aggregate
from .strategies import StrategyKind, predicted_bound

RESULTS_SCHEMA = 1
STRATEGY_ORDER = (StrategyKind.EAGER, StrategyKind.LEASE, StrategyKind.LAZY, StrategyKind.RCC)
METRIC_LABELS = {
    "unauthorized_ops": "Unauthorised ops",
    "staleness_max_ticks": "Staleness max (ticks)",
    "messages_sent": "Messages sent",
    "revalidation_count": "Revalidation count",
    "bound_violations": "Bound violations",
    "cascade_completeness": "Cascade completeness",
}
SWEEP_VELOCITIES = (10, 100, 10_000)


def scenario_velocity(config: ScenarioConfig) -> int:
    """Peak ops per tick any agent can reach in ``config``."""
    base = int(config.action_model.value) if config.deterministic else 1
    return max(base, config.anomaly_burst_rate or 0)


def format_cell(stats: MetricStats) -> str:
    sigma = "0" if stats.sigma == 0 else f"{stats.sigma:,.1f}"
    return f"{stats.mean:,.1f} ± {sigma}"


@dataclass
class ResultTable:
    scenario: str
    strategies: list[str] = field(default_factory=list)
    cells: dict[tuple[str, str], MetricStats] = field(default_factory=dict)  # (metric, strategy)
    bounds: dict[str, float] = field(default_factory=dict)
    per_capability_max: dict[str, int] = field(default_factory=dict)

    @property
    def metrics(self) -> list[str]:
        return [m for m in METRIC_LABELS if any((m, s) in self.cells for s in self.strategies)]

    @property
    def total_violations(self) -> float:
        return sum(self.cells[("bound_violations", s)].max for s in self.strategies)

    def to_text(self) -> str:
        header = ["Metric", *self.strategies]
        rows = [header]
        for m in self.metrics:
            rows.append([METRIC_LABELS[m], *(format_cell(self.cells[(m, s)]) for s in self.strategies)])
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return f"scenario: {self.scenario}\n" + "\n".join(lines)

    def to_records(self) -> list[dict]:
        out = []
        for s in self.strategies:
            for m in self.metrics:
                st = self.cells[(m, s)]
                out.append({
                    "schema": RESULTS_SCHEMA, "kind": "metric", "scenario": self.scenario,
                    "strategy": s, "metric": m,
                    "mean": st.mean, "sigma": st.sigma, "min": st.min, "max": st.max,
                })
            out.append({
                "schema": RESULTS_SCHEMA, "kind": "bound", "scenario": self.scenario,
                "strategy": s, "predicted_bound": self.bounds[s],
                "per_capability_max": self.per_capability_max[s],
            })
        return out

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    @classmethod
    def from_records(cls, records: list[dict]) -> "ResultTable":
        table = cls(scenario=records[0]["scenario"] if records else "")
        for rec in records:
            if rec.get("schema") != RESULTS_SCHEMA:
                raise ValueError(f"unsupported results schema {rec.get('schema')!r}")
            s = rec["strategy"]
            if s not in table.strategies:
                table.strategies.append(s)
            if rec["kind"] == "metric":
                table.cells[(rec["metric"], s)] = MetricStats(rec["mean"], rec["sigma"], rec["min"], rec["max"])
            else:
                table.bounds[s] = rec["predicted_bound"]
                table.per_capability_max[s] = rec["per_capability_max"]
        return table

    @classmethod
    def read(cls, path) -> "ResultTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_records([json.loads(line) for line in fh if line.strip()])


def _strategies(strategy: str | StrategyKind) -> list[StrategyKind]:
    if strategy == "all":
        return list(STRATEGY_ORDER)
    return [StrategyKind(strategy)]


def run_experiment(
    config_path,
    strategy: str | StrategyKind = "all",
    seeds: Sequence[int] | None = None,
    out=None,
    *,
    config: ScenarioConfig | None = None,
    inject_violation: bool = False,
) -> tuple[ResultTable, int]:
    """Batch-run the requested strategies; exit status is 1 on any bound violation.

    ``inject_violation`` adds one synthetic violation to the first strategy's
    runs; it exists so the failure path can be exercised.
    """
    config = config or load_config(config_path)
    table = ResultTable(scenario=config.name)
    v = scenario_velocity(config)
    for i, kind in enumerate(_strategies(strategy)):
        agg = run_batch(config, kind, seeds)
        if inject_violation and i == 0:
            agg = _with_extra_violation(agg)
        table.strategies.append(kind.value)
        for m, st in agg.stats.items():
            table.cells[(m, kind.value)] = st
        table.bounds[kind.value] = float(predicted_bound(kind, config.params, v))
        table.per_capability_max[kind.value] = max(agg.per_capability_max.values(), default=0)
    if out is not None:
        table.write(out)
    return table, (1 if table.total_violations > 0 else 0)


def _with_extra_violation(agg):
    runs = list(agg.runs)
    runs[0] = replace(runs[0], bound_violations=runs[0].bound_violations + 1)
    return aggregate(runs, agg.strategy, agg.scenario)


@dataclass(frozen=True)
class BoundRow:
    strategy: str
    predicted: float
    observed_mean: float
    observed_sigma: float
    per_capability_max: int
    verdict: str


def compare_bounds(config_path, *, config: ScenarioConfig | None = None) -> list[BoundRow]:
    """Predicted bound vs observed damage for every strategy.

    Deterministic scenarios must match exactly; stochastic ones only need
    every capability to stay within its bound.
    """
    config = config or load_config(config_path)
    v = scenario_velocity(config)
    rows = []
    for kind in STRATEGY_ORDER:
        agg = run_batch(config, kind)
        predicted = float(predicted_bound(kind, config.params, v))
        observed = agg["unauthorized_ops"]
        cap_max = max(agg.per_capability_max.values(), default=0)
        if cap_max > predicted:
            verdict = "Violated"
        elif config.deterministic and observed.sigma == 0 and cap_max == predicted:
            verdict = "Exact"
        else:
            verdict = "Within"
        rows.append(BoundRow(kind.value, predicted, observed.mean, observed.sigma, cap_max, verdict))
    return rows


def velocity_sweep(
    config_path, velocities: Sequence[int] = SWEEP_VELOCITIES, *, config: ScenarioConfig | None = None
) -> list[tuple[int, float, float]]:
    """RCC at each velocity: (v, predicted bound, observed per-capability max)."""
    config = config or load_config(config_path)
    out = []
    for v in velocities:
        cfg = config.with_velocity(v)
        agg = run_batch(cfg, StrategyKind.RCC, cfg.seeds[:1])
        predicted = float(predicted_bound(StrategyKind.RCC, cfg.params, v))
        out.append((v, predicted, float(max(agg.per_capability_max.values(), default=0))))
    return out


def bounds_text(rows: list[BoundRow]) -> str:
    lines = [f"{'Strategy':<8} {'Predicted':>10} {'Observed':>16} {'Cap max':>8}  Match"]
    for r in rows:
        obs = format_cell(MetricStats(r.observed_mean, r.observed_sigma, 0, 0))
        lines.append(f"{r.strategy:<8} {r.predicted:>10,.0f} {obs:>16} {r.per_capability_max:>8}  {r.verdict}")
    return "\n".join(lines)


PLOT_COLUMNS = ("strategy", "unauthorized_mean", "unauthorized_sigma", "predicted_bound", "lease_rcc_ratio")


def emit_plot_data(results: ResultTable, path) -> None:
    """CSV for a log-scale bar chart of unauthorized ops by strategy."""
    ratio = ""
    if "lease" in results.strategies and "rcc" in results.strategies:
        rcc = results.cells[("unauthorized_ops", "rcc")].mean
        if rcc > 0:
            ratio = round(results.cells[("unauthorized_ops", "lease")].mean / rcc, 1)
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PLOT_COLUMNS)
        for s in results.strategies:
            st = results.cells[("unauthorized_ops", s)]
            writer.writerow([s, st.mean, st.sigma, results.bounds[s], ratio])
