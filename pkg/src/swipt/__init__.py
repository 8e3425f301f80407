"""Minimum-rate capacity regions for SWIPT over fading Gaussian broadcast
channels with energy-harvesting transmitter and receivers.

The library covers ideal, time-switching and power-splitting receiver
architectures, a Lagrangian dual-decomposition boundary solver, the dual
multiple-access region, and a slot-level Monte Carlo validation of the
energy-buffer model.
"""

from .errors import (
    ConvergenceError,
    InfeasibleError,
    InvalidParameterError,
    UnboundedObjectiveError,
)
from .fading import (
    JointFadingDistribution,
    MarginalFading,
    discretize_exponential,
    expectation,
    joint_product,
)
from .rates import (
    EffectiveChannel2,
    degradation_order,
    effective_channel_two_user,
    effective_deficit_report,
    effective_deficits_direct,
    harvested_rf,
    min_rate_powers,
    per_state_rates,
    power_for_rates,
)
from .solver import (
    BoundaryPoint,
    FeasibilityReport,
    Multipliers,
    PowerPolicy,
    RegionTrace,
    SolverOptions,
    feasibility_check,
    fixed_point_fractions,
    per_state_allocation,
    region_contains,
    region_polygon,
    solve_boundary,
    trace_region,
)
from .system import Architecture, HarvestFractions, SystemConfig

__version__ = "0.1.0"
