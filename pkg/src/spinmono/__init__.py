"""Simulation and verification of attractive one-dimensional spin systems."""
from .engine import (
    CouplingViolation,
    EventStream,
    WindowPlan,
    couple_translates,
    evolve_uniformized,
    plan_window,
    run_replicas,
    sample_events,
    simulate_gillespie,
)
from .exact import (
    SuffixDistribution,
    UpSet,
    build_generator,
    enumerate_upsets,
    stochastic_dominates,
    suffix_marginal,
    transient_distribution,
)
from .lattice import Configuration, dominates_pointwise, flip, local_pattern, make_initial, suffix
from .rates import (
    LocalPattern,
    RateSpec,
    build_model,
    check_attractive,
    check_coupling_monotone,
    uniformization_bound,
)
from .verify import (
    MonotonicityReport,
    OccupancyProfile,
    estimate_occupation_profile,
    verify_remark2,
    verify_theorem,
    window_self_check,
)

__version__ = "0.1.0"
