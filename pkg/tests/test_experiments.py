import csv
import subprocess
import sys

import pytest

from capcoherence.cli import main
from capcoherence.config import bundled_config_path, load_config
from capcoherence.experiments import (
    ResultTable,
    compare_bounds,
    emit_plot_data,
    format_cell,
    run_experiment,
)
from capcoherence.metrics import MetricStats

CRM = bundled_config_path("crm")


@pytest.fixture(scope="module")
def crm_table():
    table, status = run_experiment(CRM)
    assert status == 0
    return table


def test_table_layout(crm_table):
    text = crm_table.to_text()
    assert text.splitlines()[1].split() == ["Metric", "eager", "lease", "lazy", "rcc"]
    assert "500.0 ± 0" in text and "6,000.0 ± 0" in text


def test_format_cell():
    assert format_cell(MetricStats(14.86, 3.21, 0, 0)) == "14.9 ± 3.2"
    assert format_cell(MetricStats(50, 0, 50, 50)) == "50.0 ± 0"


def test_results_round_trip(crm_table, tmp_path):
    path = tmp_path / "r.jsonl"
    crm_table.write(path)
    again = ResultTable.read(path)
    assert again.cells == crm_table.cells and again.strategies == crm_table.strategies


def test_results_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_experiment(CRM, "rcc", out=a)
    run_experiment(CRM, "rcc", out=b)
    assert a.read_bytes() == b.read_bytes()


def test_injected_violation_sets_exit_status():
    table, status = run_experiment(CRM, "rcc", seeds=[0], inject_violation=True)
    assert status == 1 and table.total_violations == 1


def test_plot_data(crm_table, tmp_path):
    out = tmp_path / "p.csv"
    emit_plot_data(crm_table, out)
    rows = list(csv.DictReader(out.open()))
    assert [r["strategy"] for r in rows] == ["eager", "lease", "lazy", "rcc"]
    assert {r["lease_rcc_ratio"] for r in rows} == {"120.0"}


def test_plot_data_empty(tmp_path):
    out = tmp_path / "p.csv"
    emit_plot_data(ResultTable("none"), out)
    assert out.read_text().count("\n") == 1


def test_crm_bounds_exact():
    assert {r.verdict for r in compare_bounds(CRM)} == {"Exact"}


def test_cli_commands(tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    assert main(["run", "crm", "--strategy", "rcc", "--seeds", "0..2", "--out", str(out)]) == 0
    assert "50.0 ± 0" in capsys.readouterr().out
    assert main(["plot", str(out)]) == 0
    assert out.with_suffix(".csv").exists()
    assert main(["verify-equivalence"]) == 0
    assert "verdict: equivalent" in capsys.readouterr().out
    assert main(["bounds", str(CRM)]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "capcoherence", "verify-equivalence"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "equivalent" in proc.stdout


def test_velocity_sweep_keeps_rcc_bound():
    from capcoherence.experiments import velocity_sweep
    cfg = load_config(CRM)
    for v, predicted, observed in velocity_sweep(CRM, config=cfg):
        assert predicted == 50 and observed <= predicted
