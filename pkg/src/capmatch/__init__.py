"""Capacity-constrained matching mechanisms for position auctions, with exact oracles and audits."""
from .core import (
    DensityEntry,
    Instance,
    InvalidMatchingError,
    Matching,
    PositionAuctionInstance,
    Violation,
    as_rational,
    density_order,
    realized,
    validate,
    welfare,
)
from .instances import CATALOG, expected_values, paper_instance, random_family_instance, random_instance
from .mechanisms import (
    Trace,
    g_vmax,
    greedy_by_density,
    greedy_by_value,
    max_greedy,
    mechanism1,
    mechanism2,
    mechanism3,
    mechanism4,
    replay,
    structure_check,
)
from .oracle import approximation_ratio, monotonicity_audit, optimal_matching, position_optimum, rearrangement_check
from .payments import myerson_payment, truthfulness_audit

__version__ = "0.1.0"

__all__ = [
    "DensityEntry",
    "Instance",
    "InvalidMatchingError",
    "Matching",
    "PositionAuctionInstance",
    "Violation",
    "as_rational",
    "density_order",
    "realized",
    "validate",
    "welfare",
    "Trace",
    "g_vmax",
    "greedy_by_density",
    "greedy_by_value",
    "max_greedy",
    "mechanism1",
    "mechanism2",
    "mechanism3",
    "mechanism4",
    "replay",
    "structure_check",
    "CATALOG",
    "expected_values",
    "paper_instance",
    "random_family_instance",
    "random_instance",
    "approximation_ratio",
    "monotonicity_audit",
    "optimal_matching",
    "position_optimum",
    "rearrangement_check",
    "myerson_payment",
    "truthfulness_audit",
]
