from __future__ import annotations

import enum
import hashlib
import math
from typing import Any

import attrs
import orjson

from hintweaver.errors import ParameterError
from hintweaver.models.market import Direction, Pair, Trade
from hintweaver.models.privacy import AmplifiedBudget, QueryKind


class HintField(str, enum.Enum):
    PAIR = "pair"
    PROTOCOL = "protocol"
    AMOUNT = "amount"
    DIRECTION = "direction"


def _serialize(inst: Any, field: attrs.Attribute | None, value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (set, frozenset)):
        return sorted(v.value if isinstance(v, enum.Enum) else v for v in value)
    return value


def record_dict(record: Any) -> dict[str, Any]:
    """JSON-ready dict of an attrs record: enums become values, sets become sorted lists."""
    return attrs.asdict(record, value_serializer=_serialize)


def _positive(instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{attribute.name} must be positive, got {value!r}")


@attrs.define(frozen=True)
class TxFilter:
    """Selects trades by canonical pair key ("A/B") and/or protocol; None matches anything."""

    pair: str | None = None
    protocol: str | None = None

    def matches(self, trade: Trade) -> bool:
        if self.pair is not None and trade.pair.key != self.pair:
            return False
        return self.protocol is None or trade.protocol == self.protocol

    def __str__(self) -> str:
        return f"{self.pair or '*'}@{self.protocol or '*'}"


@attrs.define(frozen=True)
class CountCondition:
    min_opted_in: int = attrs.field(default=10)
    min_opted_out: int = attrs.field(default=10)

    @min_opted_in.validator
    @min_opted_out.validator
    def _check_threshold(self, attribute: attrs.Attribute, value: int) -> None:
        if value < 1:
            raise ParameterError(f"{attribute.name} must be at least 1, got {value!r}")


@attrs.define(frozen=True)
class AggSpec:
    spec_id: str
    query: QueryKind = attrs.field(converter=QueryKind)
    filter: TxFilter = attrs.field(factory=TxFilter)
    attribute: HintField = attrs.field(default=HintField.AMOUNT, converter=HintField)
    condition: CountCondition = attrs.field(factory=CountCondition)
    epsilon_cond: float = attrs.field(default=1.0, converter=float, validator=_positive)
    epsilon_query: float = attrs.field(default=1.0, converter=float, validator=_positive)
    clamp_cap: float | None = attrs.field(default=None)

    @clamp_cap.validator
    def _check_cap(self, attribute: attrs.Attribute, value: float | None) -> None:
        if self.query is QueryKind.SUM and (value is None or not value > 0):
            raise ParameterError(f"sum spec {self.spec_id!r} needs a positive clamp_cap")


@attrs.define(frozen=True)
class HintConfig:
    plain_fields: frozenset[HintField] = attrs.field(
        factory=lambda: frozenset({HintField.PAIR, HintField.PROTOCOL}),
        converter=lambda fields: frozenset(HintField(f) for f in fields),
    )
    agg_specs: tuple[AggSpec, ...] = attrs.field(factory=tuple, converter=tuple)

    def problems(self) -> list[str]:
        issues = []
        seen: set[str] = set()
        for spec in self.agg_specs:
            if spec.attribute in self.plain_fields:
                issues.append(
                    f"spec {spec.spec_id!r} aggregates {spec.attribute.value!r}, already public"
                )
            if spec.spec_id in seen:
                issues.append(f"spec {spec.spec_id!r} listed twice")
            seen.add(spec.spec_id)
        return issues

    @property
    def spec_ids(self) -> tuple[str, ...]:
        return tuple(s.spec_id for s in self.agg_specs)

    def discloses(self, field: HintField) -> bool:
        return field in self.plain_fields


@attrs.define(frozen=True)
class Transaction:
    txid: str
    sender: str
    trades: tuple[Trade, ...] = attrs.field(converter=tuple)
    hint_config: HintConfig = attrs.field(factory=HintConfig)

    @trades.validator
    def _check_trades(self, attribute: attrs.Attribute, value: tuple[Trade, ...]) -> None:
        if not value:
            raise ParameterError(f"transaction {self.txid!r} carries no trades")

    def opted_into(self, spec_id: str) -> bool:
        return spec_id in self.hint_config.spec_ids

    def matches(self, tx_filter: TxFilter) -> bool:
        return any(tx_filter.matches(t) for t in self.trades)

    def contribution(self, tx_filter: TxFilter) -> float:
        """Total input amount of the trades `tx_filter` selects."""
        return float(sum(t.amount_in for t in self.trades if tx_filter.matches(t)))


@attrs.define(frozen=True)
class TradeHint:
    pair: Pair | None = None
    protocol: str | None = None
    amount: int | None = None
    direction: Direction | None = None

    @classmethod
    def disclose(cls, trade: Trade, fields: frozenset[HintField]) -> TradeHint:
        show_direction = HintField.DIRECTION in fields
        pair = None
        if HintField.PAIR in fields:
            pair = trade.pair if show_direction else trade.pair.canonicalized()
        return cls(
            pair=pair,
            protocol=trade.protocol if HintField.PROTOCOL in fields else None,
            amount=trade.amount_in if HintField.AMOUNT in fields else None,
            direction=trade.direction if show_direction else None,
        )


@attrs.define(frozen=True)
class PlainHint:
    txid: str
    trades: tuple[TradeHint, ...]
    opted_specs: tuple[str, ...] = ()

    @classmethod
    def of(cls, tx: Transaction) -> PlainHint:
        fields = tx.hint_config.plain_fields
        return cls(
            txid=tx.txid,
            trades=tuple(TradeHint.disclose(t, fields) for t in tx.trades),
            opted_specs=tuple(sorted(tx.hint_config.spec_ids)),
        )

    @property
    def first(self) -> TradeHint:
        return self.trades[0]


@attrs.define(frozen=True)
class AggregateRelease:
    spec_id: str
    query: QueryKind
    filter: TxFilter
    satisfied: bool
    value: float | None = attrs.field(default=None)
    clamp_cap: float | None = None
    budget: AmplifiedBudget | None = None
    condition_budgets: tuple[AmplifiedBudget, ...] = ()
    exhausted: bool = False

    @value.validator
    def _check_value(self, attribute: attrs.Attribute, value: float | None) -> None:
        if (value is not None) != self.satisfied:
            raise ParameterError(f"aggregate {self.spec_id!r}: value must be present iff satisfied")

    @property
    def epsilon_charged(self) -> float:
        total = 0.0
        for budget in (*self.condition_budgets, self.budget):
            if budget is not None:
                total += budget.epsilon_prime
        return total


@attrs.define(frozen=True)
class HintRelease:
    round: int
    q: float
    plain_hints: tuple[PlainHint, ...] = ()
    aggregates: tuple[AggregateRelease, ...] = ()

    def aggregate(self, spec_id: str) -> AggregateRelease | None:
        return next((a for a in self.aggregates if a.spec_id == spec_id), None)

    def hint(self, txid: str) -> PlainHint | None:
        return next((h for h in self.plain_hints if h.txid == txid), None)

    def opted_in(self, spec_id: str) -> list[PlainHint]:
        return [h for h in self.plain_hints if spec_id in h.opted_specs]

    def to_dict(self) -> dict[str, Any]:
        return record_dict(self)

    def encode(self) -> bytes:
        return orjson.dumps(self.to_dict(), option=orjson.OPT_SORT_KEYS)

    def digest(self) -> str:
        return hashlib.sha256(self.encode()).hexdigest()


class BundleStatus(str, enum.Enum):
    ACCEPTED = "accepted"
    RATE_LIMITED = "rate_limited"
    REJECTED = "rejected"


class RateLimitScope(str, enum.Enum):
    PER_ROUND = "per_round"
    PER_TRANSACTION = "per_transaction"


@attrs.define(frozen=True)
class BundleTemplate:
    """
    A searcher's backrun offer for one victim.

    `program` is executed right after the victim at settlement; see `hintweaver.searchers.programs`.
    """

    searcher_id: str
    txid: str
    program: Any
    strategy: str = "static"
    rebate_percent: int = attrs.field(default=50)
    gas_units: int = 100

    @rebate_percent.validator
    def _check_rebate(self, attribute: attrs.Attribute, value: int) -> None:
        if not 0 <= value <= 100:
            raise ParameterError(f"rebate_percent must lie in [0, 100], got {value!r}")


@attrs.define(frozen=True)
class FilledBundle:
    template: BundleTemplate
    victim: Transaction
    gross_profit: int
    gas_paid: int
    kickback: int
    index: int = 0

    @property
    def searcher_net(self) -> int:
        return self.gross_profit - self.gas_paid - self.kickback
