"""Pandora's box search with inaccurate priors."""

from .distribution import (
    Discrete,
    PerturbationMode,
    PerturbationSpec,
    PiecewiseLinearCdf,
    cdf,
    kolmogorov_distance,
    mean,
    perturb,
    sample,
)
from .policy import (
    ThresholdPolicy,
    Trace,
    UtilityEstimate,
    capped_benchmark,
    conditional_utility,
    expected_utility_exact,
    expected_utility_mc,
    inspection_order,
    run_policy,
)
from .reservation import Box, Instance, capped_value, expected_excess, reservation_price, thresholds
from .robustness import (
    RobustnessReport,
    SweepConfig,
    adversarial_search,
    hybrid_swap_gaps,
    regret,
    run_sweep,
    stability_gap,
)

__all__ = [
    "Box",
    "Discrete",
    "Instance",
    "PerturbationMode",
    "PerturbationSpec",
    "PiecewiseLinearCdf",
    "RobustnessReport",
    "SweepConfig",
    "ThresholdPolicy",
    "Trace",
    "UtilityEstimate",
    "adversarial_search",
    "capped_benchmark",
    "capped_value",
    "cdf",
    "conditional_utility",
    "expected_excess",
    "expected_utility_exact",
    "expected_utility_mc",
    "hybrid_swap_gaps",
    "inspection_order",
    "kolmogorov_distance",
    "mean",
    "perturb",
    "regret",
    "reservation_price",
    "run_policy",
    "run_sweep",
    "sample",
    "stability_gap",
    "thresholds",
]
