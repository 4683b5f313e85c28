import pytest

from capcoherence.engine import ActionModel, ScenarioConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary."""
    def _report(label: str, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def small_config(**overrides) -> ScenarioConfig:
    base = dict(
        name="small",
        agent_count=3,
        delegation_depth=2,
        action_model=ActionModel("deterministic", 4),
        seeds=(0, 1),
        network_latency_ticks=2,
        revocation_trigger=5,
        ttl_ticks=6,
        budget_n=5,
        check_interval_ticks=4,
        trust_threshold_tau=0.4,
        trust_decay=0.5,
        duration_ticks=30,
    )
    base.update(overrides)
    return ScenarioConfig(**base).validate()
