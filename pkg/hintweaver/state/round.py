from __future__ import annotations

import enum
from enum import auto, unique

import attrs
import numpy as np
from loguru import logger
from transitions import EventData, Machine

from hintweaver.dp.ledger import BudgetLedger
from hintweaver.dp.noise import NoiseSource
from hintweaver.errors import ParameterError
from hintweaver.matchmaker.auction import BundleBook, Settlement, settle_round
from hintweaver.matchmaker.curator import release_hints
from hintweaver.models.hints import AggSpec, BundleStatus, BundleTemplate, HintRelease, Transaction
from hintweaver.models.market import ChainState


@unique
class RoundPhase(enum.Enum):
    INGEST = auto()
    BUNDLES = auto()
    SETTLE = auto()


@attrs.define(frozen=True)
class SubmitAck:
    txid: str
    accepted: bool
    reason: str | None = None


@attrs.define(slots=False)
class Matchmaker:
    """
    Trusted curator driving one round at a time: INGEST → BUNDLES → SETTLE → INGEST.

    `publish` closes ingestion and broadcasts the round's `HintRelease`; `settle` fills and applies
    the winning bundles against the chain state passed as the `chain` keyword.
    """

    ledger: BudgetLedger
    noise: NoiseSource
    sampling: np.random.Generator
    q: float = 1.0
    specs: dict[str, AggSpec] = attrs.field(factory=dict)
    book: BundleBook = attrs.field(factory=BundleBook)
    max_wait_rounds: int = 0
    round: int = 0
    pending: dict[str, Transaction] = attrs.field(factory=dict)
    waited: dict[str, int] = attrs.field(factory=dict)
    settled_ids: set[str] = attrs.field(factory=set)
    releases: list[HintRelease] = attrs.field(factory=list)
    settlements: list[Settlement] = attrs.field(factory=list)
    machine: Machine = attrs.field()

    @machine.default
    def _machine(self) -> Machine:
        return self.__class__.create_machine(self)

    @classmethod
    def create_machine(cls, inst: Matchmaker) -> Machine:
        machine = Machine(
            states=RoundPhase,
            initial=RoundPhase.INGEST,
            send_event=True,
            auto_transitions=False,
        )
        machine.add_transition(
            trigger="publish",
            source=RoundPhase.INGEST,
            dest=RoundPhase.BUNDLES,
            before="release_pending",
        )
        machine.add_transition(
            trigger="close_bundles", source=RoundPhase.BUNDLES, dest=RoundPhase.SETTLE
        )
        machine.add_transition(
            trigger="settle",
            source=RoundPhase.SETTLE,
            dest=RoundPhase.INGEST,
            before="settle_pending",
            after="advance_round",
        )
        machine.add_model(inst)
        return machine

    @property
    def phase(self) -> RoundPhase:
        return self.state  # type: ignore[attr-defined]

    @property
    def current_release(self) -> HintRelease | None:
        if self.releases and self.releases[-1].round == self.round:
            return self.releases[-1]
        return None

    def register_spec(self, spec: AggSpec) -> None:
        known = self.specs.get(spec.spec_id)
        if known is not None and known != spec:
            raise ParameterError(f"spec {spec.spec_id!r} is registered with another definition")
        self.specs[spec.spec_id] = spec

    def submit_transaction(self, tx: Transaction) -> SubmitAck:
        if self.phase is not RoundPhase.INGEST:
            return SubmitAck(tx.txid, False, "round is not accepting transactions")
        if tx.txid in self.pending or tx.txid in self.settled_ids:
            return SubmitAck(tx.txid, False, "duplicate transaction id")
        if problems := tx.hint_config.problems():
            return SubmitAck(tx.txid, False, "; ".join(problems))
        for spec in tx.hint_config.agg_specs:
            known = self.specs.get(spec.spec_id)
            if known is not None and known != spec:
                reason = f"spec {spec.spec_id!r} conflicts with its registration"
                return SubmitAck(tx.txid, False, reason)
        for spec in tx.hint_config.agg_specs:
            self.register_spec(spec)
        self.pending[tx.txid] = tx
        self.waited.setdefault(tx.txid, 0)
        logger.trace("accepted transaction {} from {}", tx.txid, tx.sender)
        return SubmitAck(tx.txid, True)

    def release_pending(self, event: EventData) -> None:
        specs = [self.specs[k] for k in sorted(self.specs)]
        release = release_hints(
            list(self.pending.values()),
            specs,
            self.q,
            self.noise,
            self.sampling,
            self.ledger,
            round=self.round,
        )
        self.releases.append(release)
        self.book.clear()

    def accept_bundle(self, searcher_id: str, template: BundleTemplate) -> BundleStatus:
        if self.phase is not RoundPhase.BUNDLES:
            return BundleStatus.REJECTED
        return self.book.submit(searcher_id, template, self.pending.keys())

    def settle_pending(self, event: EventData) -> None:
        chain: ChainState = event.kwargs["chain"]
        result = settle_round(
            chain.at_round(self.round),
            list(self.pending.values()),
            list(self.book.templates),
            waited=self.waited,
            max_wait_rounds=self.max_wait_rounds,
            already_settled=self.settled_ids,
        )
        for txid in result.removed:
            self.pending.pop(txid, None)
            self.waited.pop(txid, None)
        self.settled_ids.update(result.settled)
        for txid in result.deferred:
            self.waited[txid] += 1
        self.settlements.append(result)

    def advance_round(self, event: EventData) -> None:
        logger.debug(
            "settled round {} (winners={}, standalone={}, deferred={})",
            self.round,
            len(self.settlements[-1].winners),
            len(self.settlements[-1].standalone),
            len(self.settlements[-1].deferred),
        )
        self.book.clear()
        self.round += 1

    def release_round(self) -> HintRelease:
        self.publish()  # type: ignore[attr-defined]
        return self.releases[-1]

    def settle_round(self, chain: ChainState) -> Settlement:
        if self.phase is RoundPhase.BUNDLES:
            self.close_bundles()  # type: ignore[attr-defined]
        self.settle(chain=chain)  # type: ignore[attr-defined]
        return self.settlements[-1]
