from __future__ import annotations

import attrs
from loguru import logger

from hintweaver.errors import HintweaverError
from hintweaver.market.amm import NO_ARBITRAGE, Arbitrage, execute, optimal_arb_amount, swap
from hintweaver.models.market import AppliedTrade, ChainState, Direction, Pair, PoolState, Trade


def apply_trade(state: ChainState, trade: Trade) -> tuple[int, ChainState]:
    """Execute `trade` on its pool and append it to the state's history."""
    pool = state.pool(trade.protocol, trade.pair)
    amount_out, new_pool = execute(pool, trade)
    new_state = attrs.evolve(
        state.with_pool(new_pool),
        history=(*state.history, AppliedTrade(state.round, trade, amount_out)),
    )
    return amount_out, new_state


def apply_trades(state: ChainState, trades: tuple[Trade, ...]) -> tuple[list[int], ChainState]:
    outs = []
    for trade in trades:
        out, state = apply_trade(state, trade)
        outs.append(out)
    return outs, state


def execute_arbitrage(
    state: ChainState, pair: Pair, buy_venue: str, sell_venue: str, amount_in: int
) -> tuple[int, ChainState]:
    """
    Two-hop round trip: sell `amount_in` token2 for token1 on `buy_venue`, then sell every unit of
    token1 received for token2 on `sell_venue`. Returns (token2 profit, new state).
    """
    leg_one = Trade(
        pair=pair.oriented(Direction.SELL_TOKEN2), protocol=buy_venue, amount_in=amount_in
    )
    mid, state = apply_trade(state, leg_one)
    leg_two = Trade(pair=pair.oriented(Direction.SELL_TOKEN1), protocol=sell_venue, amount_in=mid)
    out, state = apply_trade(state, leg_two)
    return out - amount_in, state


@attrs.define(frozen=True)
class BackrunPlan:
    pair: Pair
    assumed_amount: int
    arbitrage: Arbitrage = NO_ARBITRAGE
    trades: tuple[Trade, ...] = ()

    @property
    def profit(self) -> int:
        return self.arbitrage.expected_profit

    @property
    def amount_in(self) -> int:
        return self.arbitrage.amount_in

    @property
    def route(self) -> tuple[str, str] | None:
        if not self.arbitrage.profitable:
            return None
        return (self.arbitrage.buy_venue or "", self.arbitrage.sell_venue or "")


def best_counter_venue(post: PoolState, state: ChainState, *, exact: bool = True) -> Arbitrage:
    """Most profitable arbitrage between `post` and any other venue pooling the same pair."""
    best = NO_ARBITRAGE
    for venue in state.venues(post.pair):
        if venue == post.protocol:
            continue
        arb = optimal_arb_amount(post, state.pool(venue, post.pair), exact=exact)
        if arb.expected_profit > best.expected_profit:
            best = arb
    return best


def backrun(
    pair: Pair,
    protocol: str,
    amount_in: int,
    l1: int,
    l2: int,
    state: ChainState,
    *,
    exact: bool = True,
) -> BackrunPlan:
    """
    Greedy cross-venue backrun of a victim that swapped `amount_in` along `pair` on `protocol`.

    (l1, l2) are the venue's reserves before the victim; the post-victim pool is rebuilt from them
    and arbitraged against whichever other venue for the pair yields the most profit.
    """
    canonical = pair.canonicalized()
    venue = attrs.evolve(state.pool(protocol, pair), l1=l1, l2=l2)
    try:
        _, post = swap(venue, amount_in, pair.direction)
    except HintweaverError as e:
        logger.debug("assumed victim swap failed ({}); backrun is empty", e)
        return BackrunPlan(pair=canonical, assumed_amount=amount_in)
    arb = best_counter_venue(post, state, exact=exact)
    if not arb.profitable:
        return BackrunPlan(pair=canonical, assumed_amount=amount_in)

    buy_pool = post if arb.buy_venue == post.protocol else state.pool(arb.buy_venue or "", pair)
    mid, _ = swap(buy_pool, arb.amount_in, Direction.SELL_TOKEN2)
    legs = (
        Trade(
            pair=canonical.oriented(Direction.SELL_TOKEN2),
            protocol=arb.buy_venue or "",
            amount_in=arb.amount_in,
        ),
        Trade(
            pair=canonical.oriented(Direction.SELL_TOKEN1),
            protocol=arb.sell_venue or "",
            amount_in=mid,
        ),
    )
    logger.trace(
        "planned backrun (pair={}, venue={}, assumed={}, profit={})",
        pair.key,
        protocol,
        amount_in,
        arb.expected_profit,
    )
    return BackrunPlan(pair=canonical, assumed_amount=amount_in, arbitrage=arb, trades=legs)
