from __future__ import annotations

import attrs

from hintweaver.errors import ParameterError
from hintweaver.models.hints import AggSpec, HintConfig, HintField, HintRelease, Transaction
from hintweaver.models.market import Direction, Pair, Trade
from hintweaver.models.privacy import QueryKind

# no pool can ever pay this out, so every sybil trade reverts at settlement
UNREACHABLE_OUT = 1 << 128


@attrs.define(frozen=True)
class AttackPlan:
    """
    Sybil poisoning of one sum aggregate.

    `sybil_count` opted-in transactions each contribute `sybil_value` to `spec`; `decoy_count`
    opted-out ones on the same venue push the opted-out threshold. Every sybil trade carries an
    unreachable minimum output and reverts at settlement, so the batch costs nothing.
    """

    spec: AggSpec = attrs.field()
    pair: Pair = attrs.field(converter=Pair.canonicalized)
    protocol: str
    sybil_count: int = attrs.field(default=100)
    sybil_value: float = 0.0
    decoy_count: int = attrs.field(default=0)
    sender_prefix: str = "sybil"

    @spec.validator
    def _check_spec(self, attribute: attrs.Attribute, value: AggSpec) -> None:
        if value.query is not QueryKind.SUM:
            raise ParameterError(f"attack targets a sum aggregate, {value.spec_id!r} is a count")

    @sybil_count.validator
    @decoy_count.validator
    def _check_count(self, attribute: attrs.Attribute, value: int) -> None:
        if value < 0:
            raise ParameterError(f"{attribute.name} must be non-negative, got {value!r}")

    @property
    def amount(self) -> int:
        return max(1, int(round(self.sybil_value)))

    def txid(self, round: int, index: int, decoy: bool = False) -> str:
        kind = "decoy" if decoy else "tx"
        return f"{self.sender_prefix}-{kind}-{round}-{index:05d}"

    def known_values(self, round: int) -> dict[str, float]:
        """What the attacker knows it put into the aggregate: its opted-in values, clamped."""
        cap = self.spec.clamp_cap or float("inf")
        return {self.txid(round, i): min(float(self.amount), cap) for i in range(self.sybil_count)}

    @property
    def known_total(self) -> float:
        return self.sybil_count * min(float(self.amount), self.spec.clamp_cap or float("inf"))


def _sybil(plan: AttackPlan, txid: str, sender: str, opted_in: bool) -> Transaction:
    trade = Trade(
        pair=plan.pair.oriented(Direction.SELL_TOKEN2),
        protocol=plan.protocol,
        amount_in=plan.amount,
        min_amount_out=UNREACHABLE_OUT,
    )
    config = HintConfig(
        plain_fields={HintField.PAIR, HintField.PROTOCOL},
        agg_specs=(plan.spec,) if opted_in else (),
    )
    return Transaction(txid=txid, sender=sender, trades=(trade,), hint_config=config)


def craft_sybil_batch(plan: AttackPlan, round: int = 0) -> list[Transaction]:
    if plan.sybil_count < 1:
        raise ParameterError(f"a sybil batch needs at least one sybil, got {plan.sybil_count}")
    batch = [
        _sybil(plan, plan.txid(round, i), f"{plan.sender_prefix}-{i:05d}", opted_in=True)
        for i in range(plan.sybil_count)
    ]
    batch.extend(
        _sybil(
            plan,
            plan.txid(round, i, decoy=True),
            f"{plan.sender_prefix}-decoy-{i:05d}",
            opted_in=False,
        )
        for i in range(plan.decoy_count)
    )
    return batch


@attrs.define(frozen=True)
class VictimEstimate:
    value: float
    variance_inflated: bool = False


def infer_victim_value(
    release: HintRelease, plan: AttackPlan, round: int = 0, honest_expected: float = 0.0
) -> VictimEstimate | None:
    """
    Read the victim's contribution off the released sum by removing the attacker's own values.

    Below full sampling the sum is first scaled up by 1/q, which leaves the attacker guessing how
    many of its sybils made it into the sample. None when the aggregate was not released.
    """
    agg = release.aggregate(plan.spec.spec_id)
    if agg is None or not agg.satisfied or agg.value is None:
        return None
    known = plan.known_total
    if release.q >= 1:
        return VictimEstimate(agg.value - known - honest_expected)
    if release.q <= 0:
        return None
    return VictimEstimate(agg.value / release.q - known - honest_expected, variance_inflated=True)
