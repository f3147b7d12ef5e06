from .auction import (
    DEFAULT_RATE_LIMIT,
    BackrunProgram,
    BundleBook,
    Settlement,
    settle_round,
    simulate_bundle,
)
from .curator import (
    ConditionOutcome,
    arrival_order,
    evaluate_condition,
    release_hints,
    spec_view,
)

__all__ = [
    "DEFAULT_RATE_LIMIT",
    "BackrunProgram",
    "BundleBook",
    "ConditionOutcome",
    "Settlement",
    "arrival_order",
    "evaluate_condition",
    "release_hints",
    "settle_round",
    "simulate_bundle",
    "spec_view",
]
