"""A single high-velocity agent is revoked at tick 0.

At 100 ops/tick every time-based strategy leaks in proportion to velocity,
while an execution-count budget caps the leak at n no matter how fast the
agent runs.  Run with ``python3 demos/01_crm_bounds.py``.
"""

from capcoherence.config import bundled_config_path, load_config
from capcoherence.experiments import bounds_text, compare_bounds, run_experiment, velocity_sweep

path = bundled_config_path("crm")
config = load_config(path)

table, _ = run_experiment(path)
print(table.to_text())
print()

# The deterministic scenario lets every observation hit its bound exactly.
print(bounds_text(compare_bounds(path, config=config)))
print()

# Push the agent to 10k ops/tick: the budget still holds at n.
for v, predicted, observed in velocity_sweep(path, config=config):
    print(f"v={v:>6}  rcc bound {predicted:g}  worst capability {observed:g}")
