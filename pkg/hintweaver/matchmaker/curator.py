from __future__ import annotations

from collections.abc import Sequence

import attrs
import numpy as np
from loguru import logger

from hintweaver.dp.ledger import BudgetLedger
from hintweaver.dp.mechanisms import dp_count, dp_sum
from hintweaver.dp.noise import NoiseSource
from hintweaver.dp.sampling import amplify_by_subsampling, subsample_indices
from hintweaver.models.hints import AggregateRelease, AggSpec, HintRelease, PlainHint, Transaction
from hintweaver.models.privacy import (
    AmplifiedBudget,
    ContributionRecord,
    Dataset,
    PrivacyParams,
    QueryKind,
)


@attrs.define(frozen=True)
class ConditionOutcome:
    satisfied: bool
    exhausted: bool = False
    budgets: tuple[AmplifiedBudget, ...] = ()
    noisy_opted_in: float | None = None
    noisy_opted_out: float | None = None


def arrival_order(pending: Sequence[Transaction]) -> list[Transaction]:
    return sorted(pending, key=lambda tx: (tx.sender, tx.txid))


def spec_view(transactions: Sequence[Transaction], spec: AggSpec) -> Dataset:
    """One entry per transaction the spec's filter selects, flagged by whether it opted in."""
    return Dataset(
        entries=tuple(
            ContributionRecord(
                txid=tx.txid,
                value=tx.contribution(spec.filter),
                opted_in=tx.opted_into(spec.spec_id),
            )
            for tx in transactions
            if tx.matches(spec.filter)
        )
    )


def _opted_in(record: ContributionRecord) -> bool:
    return record.opted_in


def _opted_out(record: ContributionRecord) -> bool:
    return not record.opted_in


def _value(record: ContributionRecord) -> float:
    return record.value


def evaluate_condition(
    pending: Dataset,
    spec: AggSpec,
    q: float,
    rng: NoiseSource,
    ledger: BudgetLedger,
    round: int = 0,
) -> ConditionOutcome:
    """
    Noisy check of the spec's opted-in and opted-out thresholds on an already drawn subsample.

    Each of the two counts spends ε_cond/2, amplified by `q`. Both charges are refused together
    when the ledger cannot afford them, which yields an unsatisfied outcome flagged as exhausted.
    """
    if q == 0:
        return ConditionOutcome(satisfied=False)
    half = PrivacyParams(epsilon=spec.epsilon_cond / 2)
    amplified = amplify_by_subsampling(half, q)
    if not ledger.can_afford(2 * amplified.epsilon_prime):
        logger.warning("condition of spec {} skipped: budget exhausted", spec.spec_id)
        return ConditionOutcome(satisfied=False, exhausted=True)
    ledger.charge_amplified(round, f"{spec.spec_id}:cond:in", amplified)
    ledger.charge_amplified(round, f"{spec.spec_id}:cond:out", amplified)
    noisy_in = dp_count(pending, _opted_in, half, rng)
    noisy_out = dp_count(pending, _opted_out, half, rng)
    satisfied = (
        noisy_in >= spec.condition.min_opted_in and noisy_out >= spec.condition.min_opted_out
    )
    return ConditionOutcome(
        satisfied=satisfied,
        budgets=(amplified, amplified),
        noisy_opted_in=noisy_in,
        noisy_opted_out=noisy_out,
    )


def _release_aggregate(
    view: Dataset,
    spec: AggSpec,
    q: float,
    noise: NoiseSource,
    ledger: BudgetLedger,
    round: int,
) -> AggregateRelease:
    unsatisfied = AggregateRelease(
        spec_id=spec.spec_id,
        query=spec.query,
        filter=spec.filter,
        satisfied=False,
        clamp_cap=spec.clamp_cap,
    )
    params = PrivacyParams(epsilon=spec.epsilon_query)
    amplified = amplify_by_subsampling(params, q)
    cond = amplify_by_subsampling(PrivacyParams(epsilon=spec.epsilon_cond / 2), q)
    # the query must stay affordable once the condition is paid for
    if not ledger.can_afford(2 * cond.epsilon_prime + amplified.epsilon_prime):
        logger.warning("aggregate of spec {} withheld: budget exhausted", spec.spec_id)
        return attrs.evolve(unsatisfied, exhausted=True)

    outcome = evaluate_condition(view, spec, q, noise, ledger, round)
    if not outcome.satisfied:
        return attrs.evolve(
            unsatisfied, condition_budgets=outcome.budgets, exhausted=outcome.exhausted
        )
    ledger.charge_amplified(round, f"{spec.spec_id}:{spec.query.value}", amplified)

    opted = view.filter(_opted_in)
    if spec.query is QueryKind.COUNT:
        value = dp_count(opted, _opted_in, params, noise)
    else:
        assert spec.clamp_cap is not None
        value = dp_sum(opted, _value, spec.clamp_cap, params, noise)
    return AggregateRelease(
        spec_id=spec.spec_id,
        query=spec.query,
        filter=spec.filter,
        satisfied=True,
        value=value,
        clamp_cap=spec.clamp_cap,
        budget=amplified,
        condition_budgets=outcome.budgets,
    )


def release_hints(
    pending: Sequence[Transaction],
    specs: Sequence[AggSpec],
    q: float,
    noise: NoiseSource,
    sampling: np.random.Generator,
    ledger: BudgetLedger,
    round: int = 0,
) -> HintRelease:
    """
    Build the round's broadcast: plain hints for every pending transaction plus one aggregate per
    spec, all computed on a single q-subsample of the pending set.
    """
    ordered = arrival_order(pending)
    sample = [ordered[i] for i in subsample_indices(len(ordered), q, sampling)]
    aggregates = tuple(
        _release_aggregate(spec_view(sample, spec), spec, q, noise, ledger, round)
        for spec in specs
    )
    release = HintRelease(
        round=round,
        q=q,
        plain_hints=tuple(PlainHint.of(tx) for tx in sorted(pending, key=lambda tx: tx.txid)),
        aggregates=aggregates,
    )
    logger.debug(
        "released hints (round={}, pending={}, sampled={}, satisfied={})",
        round,
        len(ordered),
        len(sample),
        sum(a.satisfied for a in aggregates),
    )
    return release
