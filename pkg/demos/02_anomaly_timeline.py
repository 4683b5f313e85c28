"""Watch the trust scorer catch a bursting agent and what each strategy leaks.

a0 behaves (p = 0.7) until tick 50, then fires 12 ops per tick.  Each
anomalous tick halves its trust score; once it falls under 0.4 everything a0
holds is revoked.  The timeline below shows a0's view of its capability
around that moment for each strategy.
"""

import numpy as np

from capcoherence.config import bundled_config_path, load_config
from capcoherence.engine import run
from capcoherence.strategies import StrategyKind

config = load_config(bundled_config_path("anomaly"))
window = range(48, 58)

for kind in StrategyKind:
    res = run(config, kind, seed=0)
    cap_id, revoked = next(iter(res.trace.revocations.items()))
    states = "".join(res.trace.records[t].views[cap_id][0] for t in window)
    ops = [res.trace.records[t].views[cap_id][1] for t in window]
    print(f"{kind.value:<6} revoked@{revoked}  states {states}  ops {ops}  unauthorized {res.unauthorized_ops}")

print()
leaks = {k: np.mean([run(config, k, s).unauthorized_ops for s in config.seeds]) for k in StrategyKind}
for kind, mean in leaks.items():
    print(f"{kind.value:<6} mean unauthorized over seeds 0-9: {mean:8.1f}")
print(f"lease / rcc = {leaks[StrategyKind.LEASE] / leaks[StrategyKind.RCC]:.1f}")
