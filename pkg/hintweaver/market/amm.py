from __future__ import annotations

import math

import attrs
import numpy as np
from loguru import logger

from hintweaver.errors import (
    DustTradeError,
    InconsistentSnapshotError,
    MarketError,
    ParameterError,
    SlippageError,
)
from hintweaver.models.market import FEE_DENOMINATOR, Direction, PoolState, Trade

_INT64_SAFE = 2**62
MAX_EXACT_SCAN = 1 << 20


def quote_out(reserve_in: int, reserve_out: int, amount_in: int, fee_ppm: int) -> int:
    """floor(reserve_out · a / (reserve_in + a)) with a = amount_in · (1 − fee)."""
    a_num = amount_in * (FEE_DENOMINATOR - fee_ppm)
    return reserve_out * a_num // (reserve_in * FEE_DENOMINATOR + a_num)


def swap(pool: PoolState, amount_in: int, direction: Direction) -> tuple[int, PoolState]:
    if not pool.active:
        raise MarketError(f"pool {pool.key!r} is not active")
    if not isinstance(amount_in, int) or amount_in <= 0:
        raise ParameterError(f"swap amount must be a positive integer, got {amount_in!r}")
    reserve_in, reserve_out = pool.reserves(direction)
    amount_out = quote_out(reserve_in, reserve_out, amount_in, pool.fee_ppm)
    if amount_out == 0:
        raise DustTradeError(f"swap of {amount_in} on {pool.protocol!r} outputs nothing")
    new_pool = pool.with_reserves(direction, reserve_in + amount_in, reserve_out - amount_out)
    return amount_out, new_pool


def execute(pool: PoolState, trade: Trade) -> tuple[int, PoolState]:
    """Swap `trade` against `pool`, reverting when output falls below its minimum."""
    amount_out, new_pool = swap(pool, trade.amount_in, trade.direction)
    if amount_out < trade.min_amount_out:
        raise SlippageError(
            f"trade on {pool.protocol!r} got {amount_out}, below minimum {trade.min_amount_out}"
        )
    return amount_out, new_pool


@attrs.define(frozen=True)
class InferredTrade:
    amount_in: int
    amount_out: int
    direction: Direction = Direction.SELL_TOKEN2
    traded: bool = True

    def __iter__(self):
        return iter((self.amount_in, self.amount_out))


def infer_trade_from_liquidity(before: PoolState, after: PoolState) -> InferredTrade:
    """
    Recover the single swap between two snapshots of one pool.

    In the token2-to-token1 direction amount_in = l2′ − l2 and amount_out = l1 − l1′; the opposite
    direction is reported with a flipped direction flag.
    """
    if before.key != after.key:
        raise InconsistentSnapshotError(f"snapshots of different pools: {before.key} / {after.key}")
    grow2 = after.l2 - before.l2
    shrink1 = before.l1 - after.l1
    if grow2 == 0 and shrink1 == 0:
        return InferredTrade(0, 0, traded=False)
    if grow2 > 0 and shrink1 > 0:
        return InferredTrade(grow2, shrink1, Direction.SELL_TOKEN2)
    if grow2 < 0 and shrink1 < 0:
        return InferredTrade(-shrink1, -grow2, Direction.SELL_TOKEN1)
    raise InconsistentSnapshotError(
        f"liquidity deltas (l1 {-shrink1:+d}, l2 {grow2:+d}) cannot come from one swap"
    )


@attrs.define(frozen=True)
class Arbitrage:
    """Buy token1 with token2 on `buy_venue`, sell it back for token2 on `sell_venue`."""

    amount_in: int
    expected_profit: int
    buy_venue: str | None = None
    sell_venue: str | None = None

    @property
    def profitable(self) -> bool:
        return self.expected_profit > 0

    def __iter__(self):
        return iter((self.amount_in, self.expected_profit))


NO_ARBITRAGE = Arbitrage(0, 0)


def _fee_fraction(fee_ppm: int) -> tuple[int, int]:
    """(1 − fee) as a reduced fraction (numerator, denominator)."""
    keep = FEE_DENOMINATOR - fee_ppm
    common = math.gcd(keep, FEE_DENOMINATOR)
    return keep // common, FEE_DENOMINATOR // common


@attrs.define(frozen=True)
class _Route:
    """
    Two-leg route as integers: leg one sells token2 into the buy pool, leg two sells the token1
    proceeds into the sell pool. Fees are kept as reduced fractions g/den.
    """

    a_in: int
    a_out: int
    g_a: int
    den_a: int
    b_in: int
    b_out: int
    g_b: int
    den_b: int

    @classmethod
    def between(cls, buy: PoolState, sell: PoolState) -> _Route:
        a_in, a_out = buy.reserves(Direction.SELL_TOKEN2)
        b_in, b_out = sell.reserves(Direction.SELL_TOKEN1)
        g_a, den_a = _fee_fraction(buy.fee_ppm)
        g_b, den_b = _fee_fraction(sell.fee_ppm)
        return cls(a_in, a_out, g_a, den_a, b_in, b_out, g_b, den_b)

    def coefficients(self) -> tuple[int, int, int]:
        """(N, D, E) with round-trip output N·x / (D + E·x) for the fee-adjusted curves."""
        n = self.g_a * self.g_b * self.a_out * self.b_out
        d = self.a_in * self.den_a * self.b_in * self.den_b
        e = self.g_a * (self.b_in * self.den_b + self.g_b * self.a_out)
        return n, d, e

    def profit(self, amount_in: int) -> int:
        a_num = amount_in * self.g_a
        mid = self.a_out * a_num // (self.a_in * self.den_a + a_num)
        b_num = mid * self.g_b
        return self.b_out * b_num // (self.b_in * self.den_b + b_num) - amount_in

    def profits(self, amounts: np.ndarray) -> np.ndarray:
        """Vectorised `profit`; falls back to Python-int object arrays when int64 would overflow."""
        top = int(amounts.max()) if amounts.size else 0
        # both legs are monotone in the input, so the largest amount bounds every intermediate
        mid_top = self.a_out * self.g_a * top // (self.a_in * self.den_a + self.g_a * top or 1)
        bound = max(
            self.a_out * self.g_a * top,
            self.a_in * self.den_a + self.g_a * top,
            self.b_out * self.g_b * mid_top,
            self.b_in * self.den_b + self.g_b * mid_top,
        )
        x = amounts.astype(np.int64) if bound < _INT64_SAFE else amounts.astype(object)
        mid = (self.a_out * self.g_a * x) // (self.a_in * self.den_a + self.g_a * x)
        out = (self.b_out * self.g_b * mid) // (self.b_in * self.den_b + self.g_b * mid)
        return out - x


def _scan(route: _Route, lo: int, hi: int) -> tuple[int, int]:
    """Best (amount, profit) over [lo, hi]; ties go to the smallest amount."""
    amounts = np.arange(lo, hi + 1, dtype=np.int64)
    profits = route.profits(amounts)
    best = int(np.argmax(profits))
    return int(amounts[best]), int(profits[best])


def _optimal_on_route(route: _Route, exact: bool) -> tuple[int, int]:
    n, d, e = route.coefficients()
    if n <= d:
        return 0, 0
    nd = n * d
    root = math.isqrt(nd)
    x_star = (root - d) // e
    candidates = {max(1, x_star), max(1, x_star + 1)}
    amount, profit = max(((x, route.profit(x)) for x in candidates), key=lambda c: (c[1], -c[0]))
    if exact:
        # every amount beating `target` lies where the continuous profit N·x/(D+E·x) − x ≥ target
        target = max(profit, 1)
        b = n - d - target * e
        disc = b * b - 4 * e * target * d
        if disc >= 0:
            s = math.isqrt(disc) + 1
            lo = max(1, (b - s) // (2 * e))
            hi = max(lo, -(-(b + s) // (2 * e)))
            if hi - lo > MAX_EXACT_SCAN:
                logger.debug("arbitrage window too wide to scan exactly ({} amounts)", hi - lo)
                mid = (lo + hi) // 2
                lo, hi = max(1, mid - MAX_EXACT_SCAN // 2), mid + MAX_EXACT_SCAN // 2
            scanned = _scan(route, lo, hi)
            if (scanned[1], -scanned[0]) > (profit, -amount):
                amount, profit = scanned
    if profit <= 0:
        return 0, 0
    return amount, profit


def _check_same_pair(pool_a: PoolState, pool_b: PoolState) -> None:
    if pool_a.pair.canonical != pool_b.pair.canonical:
        raise ParameterError(f"pools trade different pairs: {pool_a.pair.key} / {pool_b.pair.key}")


def optimal_arb_amount(pool_a: PoolState, pool_b: PoolState, *, exact: bool = True) -> Arbitrage:
    """
    Profit-maximising token2 input for buying token1 on the cheaper pool and selling on the dearer.

    The fee-adjusted closed form x* = (sqrt(N·D) − D)/E seeds the search; with `exact` the integer
    optimum is found by scanning every amount whose continuous profit could still beat the seed.
    Returns an empty `Arbitrage` when nothing is profitable.
    """
    _check_same_pair(pool_a, pool_b)
    if not (pool_a.active and pool_b.active) or pool_a.price == pool_b.price:
        return NO_ARBITRAGE
    buy, sell = (pool_a, pool_b) if pool_a.price < pool_b.price else (pool_b, pool_a)
    amount, profit = _optimal_on_route(_Route.between(buy, sell), exact)
    if not profit:
        return NO_ARBITRAGE
    return Arbitrage(amount, profit, buy.protocol, sell.protocol)


def route_profit(buy: PoolState, sell: PoolState, amount_in: int) -> int:
    """Exact token2 profit of a two-leg round trip of `amount_in` through `buy` then `sell`."""
    return _Route.between(buy, sell).profit(amount_in)


def grid_search_arb(pool_a: PoolState, pool_b: PoolState, chunk: int = 1 << 20) -> Arbitrage:
    """Exhaustive oracle: every integer input up to the buy pool's token2 reserve, both routes."""
    _check_same_pair(pool_a, pool_b)
    best = NO_ARBITRAGE
    for buy, sell in ((pool_a, pool_b), (pool_b, pool_a)):
        if not (buy.active and sell.active):
            continue
        route = _Route.between(buy, sell)
        for lo in range(1, route.a_in + 1, chunk):
            hi = min(route.a_in, lo + chunk - 1)
            amount, profit = _scan(route, lo, hi)
            if profit > best.expected_profit:
                best = Arbitrage(amount, profit, buy.protocol, sell.protocol)
    return best
