"""A compromised payment agent at the top of a three-deep delegation chain.

Revoking the root at tick 100 takes down the whole chain in the authority's
books immediately; how long each delegee keeps acting depends on the strategy.
"""

from capcoherence.config import bundled_config_path, load_config
from capcoherence.engine import run
from capcoherence.strategies import StrategyKind

config = load_config(bundled_config_path("banking"))

for kind in StrategyKind:
    res = run(config, kind, seed=0)
    holders = res.trace.holders
    per_cap = ", ".join(f"{holders[c]}:{n}" for c, n in sorted(res.per_capability.items()))
    print(
        f"{kind.value:<6} unauthorized {res.unauthorized_ops:>3}  staleness {res.staleness_max_ticks:>2}"
        f"  per holder [{per_cap}]  notices {res.messages_sent}  fan-out {res.broadcast_messages}"
    )
