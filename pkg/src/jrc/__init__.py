"""Joint routing-and-charging scheduling for electric truck fleets.

Decomposition-first solver library: a time-expanded scheduling model,
per-truck exact subproblems coordinated by surrogate level-based
Lagrangian relaxation, a brute-force oracle and an independent schedule
verifier for desk-scale validation, and a CLI.
"""

from .instance import (
    ChargerSite,
    Demand,
    Instance,
    Network,
    Node,
    RoadSegment,
    Truck,
    ValidationReport,
    canonical_json,
    derive_horizon,
    derive_trip_count,
    eligible_trucks,
    from_json_dict,
    load_instance,
    save_instance,
    to_json_dict,
    validate,
)
from .model import (
    CostBreakdown,
    CouplingSpace,
    build_model,
    coupling_space,
    coupling_violations,
    lagrangian_value,
    objective,
)
from .schedule import Leg, Solution, TripPlan, TruckSchedule, empty_solution

__all__ = [
    "ChargerSite",
    "CostBreakdown",
    "CouplingSpace",
    "Demand",
    "Instance",
    "Leg",
    "Network",
    "Node",
    "RoadSegment",
    "Solution",
    "TripPlan",
    "Truck",
    "TruckSchedule",
    "ValidationReport",
    "build_model",
    "canonical_json",
    "coupling_space",
    "coupling_violations",
    "derive_horizon",
    "derive_trip_count",
    "eligible_trucks",
    "empty_solution",
    "from_json_dict",
    "lagrangian_value",
    "load_instance",
    "objective",
    "save_instance",
    "to_json_dict",
    "validate",
]
