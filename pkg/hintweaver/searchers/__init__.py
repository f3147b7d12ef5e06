from .agent import Searcher
from .priors import DEFAULT_PRIOR, AmountPrior, PriorFamily, estimate_prior
from .programs import ContractBackrun, GasModel, StaticBackrun
from .strategies import (
    CutMode,
    SearcherParams,
    StrategyKind,
    StrategyReport,
    brute_force_strategy,
    candidate_amounts,
    contract_backrun_strategy,
    cut_points,
    hint_enhanced_strategy,
    hybrid_strategy,
    posterior_for,
    venue_frequencies,
)

__all__ = [
    "DEFAULT_PRIOR",
    "AmountPrior",
    "ContractBackrun",
    "CutMode",
    "GasModel",
    "PriorFamily",
    "Searcher",
    "SearcherParams",
    "StaticBackrun",
    "StrategyKind",
    "StrategyReport",
    "brute_force_strategy",
    "candidate_amounts",
    "contract_backrun_strategy",
    "cut_points",
    "estimate_prior",
    "hint_enhanced_strategy",
    "hybrid_strategy",
    "posterior_for",
    "venue_frequencies",
]
