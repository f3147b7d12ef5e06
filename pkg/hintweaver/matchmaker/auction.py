from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from typing import Protocol, runtime_checkable

import attrs
from loguru import logger

from hintweaver.errors import HintweaverError
from hintweaver.market.chain import apply_trades
from hintweaver.matchmaker.curator import arrival_order
from hintweaver.models.hints import (
    BundleStatus,
    BundleTemplate,
    FilledBundle,
    RateLimitScope,
    Transaction,
)
from hintweaver.models.market import ChainState

DEFAULT_RATE_LIMIT = 16


@runtime_checkable
class BackrunProgram(Protocol):
    """Backrun logic run right after its victim; returns (gross token2 profit, new state)."""

    def execute(
        self, pre: ChainState, post: ChainState, victim: Transaction
    ) -> tuple[int, ChainState]:
        ...


@attrs.define
class BundleBook:
    """Per-round store of accepted templates with per-searcher rate limiting."""

    limit: int = DEFAULT_RATE_LIMIT
    scope: RateLimitScope = RateLimitScope.PER_ROUND
    templates: list[BundleTemplate] = attrs.field(factory=list)
    counts: Counter[tuple[str, str | None]] = attrs.field(factory=Counter)

    def _bucket(self, searcher_id: str, txid: str) -> tuple[str, str | None]:
        return (searcher_id, txid if self.scope is RateLimitScope.PER_TRANSACTION else None)

    def submit(
        self, searcher_id: str, template: BundleTemplate, known_txids: Iterable[str]
    ) -> BundleStatus:
        if template.txid not in set(known_txids):
            logger.debug("rejected bundle from {} for unknown tx {}", searcher_id, template.txid)
            return BundleStatus.REJECTED
        bucket = self._bucket(searcher_id, template.txid)
        if self.counts[bucket] >= self.limit:
            return BundleStatus.RATE_LIMITED
        self.counts[bucket] += 1
        self.templates.append(template)
        return BundleStatus.ACCEPTED

    def count(self, searcher_id: str, txid: str | None = None) -> int:
        if self.scope is RateLimitScope.PER_ROUND:
            return self.counts[(searcher_id, None)]
        if txid is None:
            return sum(n for (sid, _), n in self.counts.items() if sid == searcher_id)
        return self.counts[(searcher_id, txid)]

    def for_tx(self, txid: str) -> list[tuple[int, BundleTemplate]]:
        return [(idx, t) for idx, t in enumerate(self.templates) if t.txid == txid]

    def clear(self) -> None:
        self.templates.clear()
        self.counts.clear()


@attrs.define(frozen=True)
class Settlement:
    state: ChainState
    winners: tuple[FilledBundle, ...] = ()
    kickbacks: Mapping[str, int] = attrs.field(factory=dict)
    settled: tuple[str, ...] = ()
    standalone: tuple[str, ...] = ()
    dropped: tuple[str, ...] = ()
    deferred: tuple[str, ...] = ()
    discarded: int = 0

    @property
    def winner(self) -> FilledBundle | None:
        return self.winners[0] if self.winners else None

    @property
    def removed(self) -> tuple[str, ...]:
        return (*self.settled, *self.dropped)

    @property
    def gross_extracted(self) -> int:
        return sum(w.gross_profit for w in self.winners)


def simulate_bundle(
    pre: ChainState, post: ChainState, victim: Transaction, template: BundleTemplate, index: int
) -> tuple[FilledBundle, ChainState] | None:
    """Fill `template` on a snapshot; None when it fails or does not clear its gas."""
    try:
        gross, state = template.program.execute(pre, post, victim)
    except HintweaverError as e:
        logger.debug("discarded bundle {} on {}: {}", index, victim.txid, e)
        return None
    gas = template.gas_units * pre.gas_price
    if gross - gas <= 0:
        return None
    kickback = gross * template.rebate_percent // 100
    filled = FilledBundle(
        template=template,
        victim=victim,
        gross_profit=gross,
        gas_paid=gas,
        kickback=kickback,
        index=index,
    )
    return filled, state


def settle_round(
    state: ChainState,
    pending: Sequence[Transaction],
    templates: Sequence[BundleTemplate],
    *,
    waited: Mapping[str, int] | None = None,
    max_wait_rounds: int = 0,
    already_settled: Iterable[str] = (),
) -> Settlement:
    """
    Settle every pending victim in arrival order.

    Each template for a victim is simulated on a snapshot (victim, then backrun). The valid bundle
    paying the largest kickback is applied; ties go to the earliest template. Victims with no
    winner execute standalone once they have waited `max_wait_rounds` rounds, else stay pending.
    A victim whose own trades revert is dropped at no cost.
    """
    waited = waited or {}
    done = set(already_settled)
    winners: list[FilledBundle] = []
    kickbacks: Counter[str] = Counter()
    settled: list[str] = []
    standalone: list[str] = []
    dropped: list[str] = []
    deferred: list[str] = []
    discarded = 0

    for victim in arrival_order(pending):
        if victim.txid in done:
            raise HintweaverError(f"transaction {victim.txid!r} was already settled")
        try:
            _, post = apply_trades(state, victim.trades)
        except HintweaverError as e:
            logger.debug("victim {} reverted ({}); dropped", victim.txid, e)
            dropped.append(victim.txid)
            continue

        best: tuple[FilledBundle, ChainState] | None = None
        for index, template in enumerate(templates):
            if template.txid != victim.txid:
                continue
            filled = simulate_bundle(state, post, victim, template, index)
            if filled is None:
                discarded += 1
                continue
            if best is None or filled[0].kickback > best[0].kickback:
                best = filled

        if best is not None:
            bundle, state = best
            winners.append(bundle)
            kickbacks[victim.sender] += bundle.kickback
            settled.append(victim.txid)
            logger.debug(
                "bundle from {} won {} (gross={}, kickback={})",
                bundle.template.searcher_id,
                victim.txid,
                bundle.gross_profit,
                bundle.kickback,
            )
        elif waited.get(victim.txid, 0) >= max_wait_rounds:
            state = post
            settled.append(victim.txid)
            standalone.append(victim.txid)
        else:
            deferred.append(victim.txid)
        done.add(victim.txid)

    return Settlement(
        state=state,
        winners=tuple(winners),
        kickbacks=dict(kickbacks),
        settled=tuple(settled),
        standalone=tuple(standalone),
        dropped=tuple(dropped),
        deferred=tuple(deferred),
        discarded=discarded,
    )
