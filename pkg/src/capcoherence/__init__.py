"""Cache-coherence-style credential revocation: state machine, strategies, simulator."""

from .authority import Authority, CapabilityRecord, Mode, RevocationRequest, TrustScore, select_broadcast_mode
from .coherence import (
    AuthEvent,
    AuthState,
    HwMesiEvent,
    HwMesiState,
    Op,
    TransientState,
    map_hw_event,
    permitted_ops,
    phi,
    transition,
    verify_structural_equivalence,
)
from .engine import ActionModel, ScenarioConfig, run, run_batch, rng_stream
from .strategies import (
    StrategyKind,
    StrategyParams,
    assign_strategy,
    predicted_bound,
    rcc_overhead,
    velocity_vulnerability,
)

__version__ = "0.1.0"
