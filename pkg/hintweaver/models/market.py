from __future__ import annotations

import enum
from fractions import Fraction

import attrs

from hintweaver.errors import ParameterError, UnknownVenueError

FEE_DENOMINATOR = 1_000_000

PoolKey = tuple[str, tuple[str, str]]


class Direction(str, enum.Enum):
    """Which reserve grows: selling token2 grows l2 and buys token1."""

    SELL_TOKEN2 = "sell_token2"
    SELL_TOKEN1 = "sell_token1"

    @property
    def flipped(self) -> Direction:
        return Direction.SELL_TOKEN1 if self is Direction.SELL_TOKEN2 else Direction.SELL_TOKEN2


@attrs.define(frozen=True, order=True)
class Pair:
    token_buy: str
    token_sell: str = attrs.field()

    @token_sell.validator
    def _check_distinct(self, attribute: attrs.Attribute, value: str) -> None:
        if value == self.token_buy:
            raise ParameterError(f"pair needs two distinct tokens, got {value!r} twice")

    @property
    def canonical(self) -> tuple[str, str]:
        return (min(self.token_buy, self.token_sell), max(self.token_buy, self.token_sell))

    @property
    def token1(self) -> str:
        return self.canonical[0]

    @property
    def token2(self) -> str:
        return self.canonical[1]

    @property
    def direction(self) -> Direction:
        return Direction.SELL_TOKEN2 if self.token_sell == self.token2 else Direction.SELL_TOKEN1

    @property
    def key(self) -> str:
        return "{}/{}".format(*self.canonical)

    def reversed(self) -> Pair:
        return Pair(token_buy=self.token_sell, token_sell=self.token_buy)

    def oriented(self, direction: Direction) -> Pair:
        token1, token2 = self.canonical
        if direction is Direction.SELL_TOKEN2:
            return Pair(token_buy=token1, token_sell=token2)
        return Pair(token_buy=token2, token_sell=token1)

    def canonicalized(self) -> Pair:
        return self.oriented(Direction.SELL_TOKEN2)

    @classmethod
    def parse(cls, value: str) -> Pair:
        """Parse "A/B" into the canonical pair of A and B."""
        try:
            a, b = (part.strip() for part in value.split("/"))
        except ValueError as e:
            raise ParameterError(f"pair must look like 'TOKEN/TOKEN', got {value!r}") from e
        return cls(token_buy=a, token_sell=b).canonicalized()

    def __str__(self) -> str:
        return f"{self.token_sell}->{self.token_buy}"


def _non_negative_int(instance: object, attribute: attrs.Attribute, value: int) -> None:
    if not isinstance(value, int) or value < 0:
        raise ParameterError(f"{attribute.name} must be a non-negative integer, got {value!r}")


@attrs.define(frozen=True)
class PoolState:
    """Constant-product pool; `l1`/`l2` are reserves of the canonical token1/token2."""

    protocol: str
    pair: Pair = attrs.field(converter=Pair.canonicalized)
    l1: int = attrs.field(validator=_non_negative_int)
    l2: int = attrs.field(validator=_non_negative_int)
    fee_ppm: int = attrs.field(default=3000)

    @fee_ppm.validator
    def _check_fee(self, attribute: attrs.Attribute, value: int) -> None:
        if not isinstance(value, int) or not 0 <= value <= FEE_DENOMINATOR:
            raise ParameterError(f"fee_ppm must be an integer in [0, 10^6], got {value!r}")

    @property
    def key(self) -> PoolKey:
        return (self.protocol, self.pair.canonical)

    @property
    def active(self) -> bool:
        return self.l1 > 0 and self.l2 > 0

    @property
    def price(self) -> Fraction:
        """Price of token1 quoted in token2."""
        return Fraction(self.l2, self.l1)

    @property
    def product(self) -> int:
        return self.l1 * self.l2

    def reserves(self, direction: Direction) -> tuple[int, int]:
        """(reserve_in, reserve_out) for a swap in `direction`."""
        if direction is Direction.SELL_TOKEN2:
            return self.l2, self.l1
        return self.l1, self.l2

    def with_reserves(self, direction: Direction, reserve_in: int, reserve_out: int) -> PoolState:
        if direction is Direction.SELL_TOKEN2:
            return attrs.evolve(self, l1=reserve_out, l2=reserve_in)
        return attrs.evolve(self, l1=reserve_in, l2=reserve_out)


@attrs.define(frozen=True)
class Trade:
    pair: Pair
    protocol: str
    amount_in: int = attrs.field()
    min_amount_out: int = 0

    @amount_in.validator
    def _check_amount(self, attribute: attrs.Attribute, value: int) -> None:
        if not isinstance(value, int) or value <= 0:
            raise ParameterError(f"trade amount_in must be a positive integer, got {value!r}")

    @property
    def direction(self) -> Direction:
        return self.pair.direction

    @property
    def pool_key(self) -> PoolKey:
        return (self.protocol, self.pair.canonical)


@attrs.define(frozen=True)
class AppliedTrade:
    round: int
    trade: Trade
    amount_out: int


@attrs.define(frozen=True)
class ChainState:
    pools: dict[PoolKey, PoolState] = attrs.field(factory=dict)
    gas_price: int = 1
    round: int = 0
    history: tuple[AppliedTrade, ...] = ()

    @pools.validator
    def _check_keys(self, attribute: attrs.Attribute, value: dict[PoolKey, PoolState]) -> None:
        for key, pool in value.items():
            if key != pool.key:
                raise ParameterError(f"pool stored under {key!r} but identifies as {pool.key!r}")

    @classmethod
    def from_pools(cls, pools: list[PoolState], gas_price: int = 1) -> ChainState:
        keyed: dict[PoolKey, PoolState] = {}
        for pool in pools:
            if pool.key in keyed:
                raise ParameterError(f"duplicate pool {pool.key!r}")
            keyed[pool.key] = pool
        return cls(pools=keyed, gas_price=gas_price)

    def pool(self, protocol: str, pair: Pair) -> PoolState:
        try:
            return self.pools[(protocol, pair.canonical)]
        except KeyError as e:
            raise UnknownVenueError(f"no pool for {pair.key} on {protocol!r}") from e

    def has_pool(self, protocol: str, pair: Pair) -> bool:
        return (protocol, pair.canonical) in self.pools

    def venues(self, pair: Pair) -> list[str]:
        return sorted(proto for proto, tokens in self.pools if tokens == pair.canonical)

    def with_pool(self, pool: PoolState) -> ChainState:
        return attrs.evolve(self, pools={**self.pools, pool.key: pool})

    def at_round(self, round: int) -> ChainState:
        return attrs.evolve(self, round=round)

    def trades_in_round(self, round: int) -> list[AppliedTrade]:
        return [t for t in self.history if t.round == round]
