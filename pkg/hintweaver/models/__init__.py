from .hints import (
    AggregateRelease,
    AggSpec,
    BundleStatus,
    BundleTemplate,
    CountCondition,
    FilledBundle,
    HintConfig,
    HintField,
    HintRelease,
    PlainHint,
    RateLimitScope,
    TradeHint,
    Transaction,
    TxFilter,
)
from .market import ChainState, Direction, Pair, PoolState, Trade
from .privacy import (
    AmplifiedBudget,
    ContributionRecord,
    Dataset,
    NoiseKind,
    NoiseParams,
    PrivacyParams,
    QueryKind,
)

__all__ = [
    "AggSpec",
    "AggregateRelease",
    "AmplifiedBudget",
    "BundleStatus",
    "BundleTemplate",
    "ChainState",
    "ContributionRecord",
    "CountCondition",
    "Dataset",
    "Direction",
    "FilledBundle",
    "HintConfig",
    "HintField",
    "HintRelease",
    "NoiseKind",
    "NoiseParams",
    "Pair",
    "PlainHint",
    "PoolState",
    "PrivacyParams",
    "QueryKind",
    "RateLimitScope",
    "TradeHint",
    "Trade",
    "Transaction",
    "TxFilter",
]
