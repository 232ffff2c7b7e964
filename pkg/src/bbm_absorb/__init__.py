"""Branching Brownian motion with a linear absorbing barrier."""
from .analytic import (
    GumbelMixtureParams,
    SegmentDraw,
    bridge_crossing_prob,
    centering,
    first_passage_density,
    gumbel_mixture_cdf,
    quadrature,
    spine_first_passage_density,
)
from .process import (
    ALL,
    SURVIVING,
    BarrierMode,
    BarrierSpec,
    OffspringLaw,
    ParticleCapExceeded,
    ParticleRecord,
    Phase,
    Population,
    SimConfig,
    TruncatedAt,
    classify_phase,
    validate_offspring,
    view,
)
from .simulator import ReplicaOutcome, advance, crossing_decision, run_replica

__version__ = "0.1.0"
