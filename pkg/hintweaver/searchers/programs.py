from __future__ import annotations

import attrs
from loguru import logger

from hintweaver.market.amm import infer_trade_from_liquidity
from hintweaver.market.chain import backrun, execute_arbitrage
from hintweaver.models.hints import Transaction
from hintweaver.models.market import ChainState, Pair


@attrs.define(frozen=True)
class GasModel:
    """Gas units per bundle; the contract pays a surcharge for every venue it probes."""

    plain: int = 100
    probe: int = 150

    def contract(self, probes: int) -> int:
        return self.plain + self.probe * max(1, probes)


@attrs.define(frozen=True)
class StaticBackrun:
    """Fixed-input round trip precomputed before settlement."""

    pair: Pair = attrs.field(converter=Pair.canonicalized)
    buy_venue: str
    sell_venue: str
    amount_in: int

    def execute(
        self, pre: ChainState, post: ChainState, victim: Transaction
    ) -> tuple[int, ChainState]:
        return execute_arbitrage(post, self.pair, self.buy_venue, self.sell_venue, self.amount_in)


@attrs.define(frozen=True)
class ContractBackrun:
    """
    On-chain backrun that reads the probed venues' liquidity before and after the victim, infers
    the victim's trade from the first venue that moved and arbitrages it exactly.
    """

    pair: Pair = attrs.field(converter=Pair.canonicalized)
    probe_venues: tuple[str, ...] = attrs.field(converter=tuple)
    exact: bool = True

    def execute(
        self, pre: ChainState, post: ChainState, victim: Transaction
    ) -> tuple[int, ChainState]:
        for venue in self.probe_venues:
            before = pre.pool(venue, self.pair)
            after = post.pool(venue, self.pair)
            inferred = infer_trade_from_liquidity(before, after)
            if inferred.traded:
                break
        else:
            logger.debug("contract for {} saw no liquidity change", victim.txid)
            return 0, post

        plan = backrun(
            self.pair.oriented(inferred.direction),
            venue,
            inferred.amount_in,
            before.l1,
            before.l2,
            post,
            exact=self.exact,
        )
        if plan.route is None:
            return 0, post
        buy, sell = plan.route
        return execute_arbitrage(post, self.pair, buy, sell, plan.amount_in)
