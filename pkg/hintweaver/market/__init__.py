from .amm import (
    NO_ARBITRAGE,
    Arbitrage,
    InferredTrade,
    execute,
    grid_search_arb,
    infer_trade_from_liquidity,
    optimal_arb_amount,
    quote_out,
    route_profit,
    swap,
)
from .chain import (
    BackrunPlan,
    apply_trade,
    apply_trades,
    backrun,
    best_counter_venue,
    execute_arbitrage,
)

__all__ = [
    "NO_ARBITRAGE",
    "Arbitrage",
    "BackrunPlan",
    "InferredTrade",
    "apply_trade",
    "apply_trades",
    "backrun",
    "best_counter_venue",
    "execute",
    "execute_arbitrage",
    "grid_search_arb",
    "infer_trade_from_liquidity",
    "optimal_arb_amount",
    "quote_out",
    "route_profit",
    "swap",
]
