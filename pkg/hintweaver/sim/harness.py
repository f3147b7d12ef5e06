from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence
from typing import Any

import attrs
import numpy as np
from loguru import logger

from hintweaver.adversary.experiment import AttackSetup
from hintweaver.adversary.sybil import AttackPlan, craft_sybil_batch, infer_victim_value
from hintweaver.dp.ledger import BudgetLedger
from hintweaver.dp.noise import NoiseSource, ZeroNoise
from hintweaver.errors import HintweaverError, ScenarioError
from hintweaver.market.chain import apply_trades
from hintweaver.matchmaker.auction import BundleBook, settle_round
from hintweaver.matchmaker.curator import release_hints
from hintweaver.models.config import ScenarioConfig
from hintweaver.models.hints import (
    AggSpec,
    BundleStatus,
    HintConfig,
    HintRelease,
    RateLimitScope,
    Transaction,
)
from hintweaver.models.market import ChainState, Direction, Pair, Trade
from hintweaver.searchers.agent import Searcher
from hintweaver.searchers.strategies import SearcherParams, StrategyReport
from hintweaver.state.round import Matchmaker
from hintweaver.utils import derive_streams, group_by, round_half_up

BASE_STREAMS = ("noise", "sampling", "population", "adversary")


@attrs.define(frozen=True)
class RoundRecord:
    round: int
    digest: str
    pending: int
    submitted: int
    satisfied: int
    templates: int
    winners: int
    standalone: int
    deferred: int
    dropped: int
    gross: int
    gas: int
    kickback: int
    searcher_net: int
    epsilon_spent: float
    aggregates: dict[str, float | None] = attrs.field(factory=dict)


@attrs.define(frozen=True)
class AttackRound:
    round: int
    estimate: float | None
    truth: float
    sybils_settled: int


@attrs.define
class RunMetrics:
    name: str
    seed: int
    rounds: list[RoundRecord] = attrs.field(factory=list)
    reports: list[StrategyReport] = attrs.field(factory=list)
    kickbacks: dict[str, int] = attrs.field(factory=dict)
    budget_trace: list[dict[str, Any]] = attrs.field(factory=list)
    budget_spent: float = 0.0
    attack: list[AttackRound] = attrs.field(factory=list)

    @property
    def gross(self) -> int:
        return sum(r.gross for r in self.rounds)

    @property
    def gas(self) -> int:
        return sum(r.gas for r in self.rounds)

    @property
    def kickback(self) -> int:
        return sum(r.kickback for r in self.rounds)

    @property
    def searcher_net(self) -> int:
        return sum(r.searcher_net for r in self.rounds)

    @property
    def conservation_gap(self) -> int:
        """Zero whenever kickbacks, searcher nets and gas account for every extracted unit."""
        return self.gross - (self.kickback + self.searcher_net + self.gas)

    def totals(self) -> dict[str, Any]:
        return {
            "rounds": len(self.rounds),
            "gross": self.gross,
            "gas": self.gas,
            "kickback": self.kickback,
            "searcher_net": self.searcher_net,
            "templates": sum(r.templates for r in self.rounds),
            "winners": sum(r.winners for r in self.rounds),
            "epsilon_spent": self.budget_spent,
        }

    def by_searcher(self) -> dict[str, dict[str, int]]:
        return {
            sid: {
                "templates": sum(r.templates for r in reports),
                "wins": sum(int(r.won) for r in reports),
                "gross": sum(r.gross for r in reports),
                "gas": sum(r.gas for r in reports),
                "kickback": sum(r.kickback for r in reports),
                "net": sum(r.net for r in reports),
            }
            for sid, reports in group_by(self.reports, lambda r: r.searcher_id).items()
        }


def build_chain(config: ScenarioConfig) -> ChainState:
    return ChainState.from_pools(
        [p.build(config.token_scale) for p in config.pools], gas_price=config.gas.price
    )


def build_specs(config: ScenarioConfig) -> dict[str, AggSpec]:
    return {s.spec_id: s.build(config.token_scale) for s in config.agg_specs}


def build_searchers(
    config: ScenarioConfig, streams: dict[str, np.random.Generator]
) -> list[Searcher]:
    marginal = config.population.marginal_prior(config.token_scale)
    searchers = []
    for sc in sorted(config.searchers, key=lambda s: s.id):
        searchers.append(
            Searcher(
                params=SearcherParams(
                    searcher_id=sc.id,
                    rebate_percent=sc.rebate_percent,
                    cut_mode=sc.cut_mode,
                    gas=config.gas.model(),
                    exact=sc.exact,
                ),
                kind=sc.strategy,
                rng=streams[f"searcher:{sc.id}"],
                k=config.rate_limit if sc.k is None else sc.k,
                prior=sc.prior.build(config.token_scale) if sc.prior else marginal,
                prior_family=sc.prior_family,
                learn_prior=sc.learn_prior,
            )
        )
    return searchers


def scenario_streams(
    config: ScenarioConfig, seed: int | Sequence[int] | None = None
) -> dict[str, np.random.Generator]:
    ids = sorted(s.id for s in config.searchers)
    names = [*BASE_STREAMS, *(f"searcher:{sid}" for sid in ids)]
    return derive_streams(config.seed if seed is None else seed, names)


def noise_source(config: ScenarioConfig, rng: np.random.Generator) -> NoiseSource:
    if not config.noise_enabled:
        return ZeroNoise()
    return rng


def draw_users(
    config: ScenarioConfig,
    round: int,
    rng: np.random.Generator,
    chain: ChainState,
    specs: dict[str, AggSpec],
) -> list[Transaction]:
    """
    The round's honest users. Their amounts come from the population prior after a per-round
    log-location drift; venue, direction and hint configuration are drawn independently.
    """
    pop = config.population
    n = pop.users_per_round
    if n == 0:
        return []
    drift = float(rng.normal(0.0, pop.regime_drift)) if pop.regime_drift else 0.0
    prior = pop.amount_prior.build(config.token_scale, drift)
    amounts = prior.sample(rng, n)
    pools = sorted(chain.pools.values(), key=lambda p: p.key)
    venue_idx = rng.integers(len(pools), size=n)
    sells_token2 = rng.random(n) < pop.sell_token2_share
    weights = np.asarray([e.weight for e in pop.hint_mix])
    mix_idx = rng.choice(len(pop.hint_mix), size=n, p=weights / weights.sum())

    users = []
    for i in range(n):
        pool = pools[venue_idx[i]]
        direction = Direction.SELL_TOKEN2 if sells_token2[i] else Direction.SELL_TOKEN1
        entry = pop.hint_mix[mix_idx[i]]
        trade = Trade(
            pair=pool.pair.oriented(direction),
            protocol=pool.protocol,
            amount_in=max(1, round_half_up(amounts[i])),
        )
        users.append(
            Transaction(
                txid=f"u{round:05d}-{i:04d}",
                sender=f"user{i:04d}",
                trades=(trade,),
                hint_config=HintConfig(
                    plain_fields=entry.plain_fields,
                    agg_specs=tuple(specs[s] for s in entry.specs),
                ),
            )
        )
    return users


def build_attack(config: ScenarioConfig, specs: dict[str, AggSpec]) -> AttackPlan | None:
    attack = config.attack
    if attack is None:
        return None
    spec = specs[attack.spec_id]
    pool = next(
        (
            p
            for p in config.pools
            if (spec.filter.pair is None or p.pair == spec.filter.pair)
            and (spec.filter.protocol is None or p.protocol == spec.filter.protocol)
        ),
        config.pools[0],
    )
    return AttackPlan(
        spec=spec,
        pair=Pair.parse(pool.pair),
        protocol=pool.protocol,
        sybil_count=attack.sybil_count,
        sybil_value=(
            spec.clamp_cap
            if attack.sybil_value is None
            else attack.sybil_value * config.token_scale
        ),
        decoy_count=attack.decoy_count,
    )


def attack_setup(config: ScenarioConfig) -> AttackSetup:
    """The configured sybil attack, isolated from the round loop for repeated trials."""
    specs = build_specs(config)
    plan = build_attack(config, specs)
    if plan is None or config.attack is None:
        raise ScenarioError("attack: the scenario configures no attack")
    population = config.population.amount_prior.build(config.token_scale)
    victim = config.attack.victim_prior
    return AttackSetup(
        plan=plan,
        victim_prior=victim.build(config.token_scale) if victim else population,
        background_users=config.attack.background_users,
        background_prior=population,
    )


def allocate(k: int, n: int) -> list[int]:
    """Split a per-round budget of `k` templates over `n` victims, earliest victims first."""
    if n == 0:
        return []
    base, extra = divmod(k, n)
    return [base + (i < extra) for i in range(n)]


def _honest_total(pending: Sequence[Transaction], spec: AggSpec, sybils: set[str]) -> float:
    cap = spec.clamp_cap or math.inf
    return sum(
        min(tx.contribution(spec.filter), cap)
        for tx in pending
        if tx.txid not in sybils and tx.opted_into(spec.spec_id) and tx.matches(spec.filter)
    )


def _propose_all(
    matchmaker: Matchmaker,
    searcher: Searcher,
    release: HintRelease,
    view: ChainState,
    scope: RateLimitScope,
) -> int:
    targets = [h.txid for h in release.plain_hints]
    if scope is RateLimitScope.PER_ROUND:
        shares = allocate(searcher.k, len(targets))
    else:
        shares = [searcher.k] * len(targets)
    accepted = 0
    for txid, k in zip(targets, shares):
        if k == 0:
            continue
        for template in searcher.propose(release, view, targets={txid}, k=k):
            if matchmaker.accept_bundle(searcher.searcher_id, template) is BundleStatus.ACCEPTED:
                accepted += 1
    return accepted


def run_scenario(
    config: ScenarioConfig, *, seed: int | None = None, rounds: int | None = None
) -> RunMetrics:
    """
    Run the scenario's rounds end to end: users and sybils submit, the matchmaker releases its
    hints, every searcher bids, and the round settles on the evolving chain state.
    """
    seed = config.seed if seed is None else seed
    streams = scenario_streams(config, seed)
    chain = build_chain(config)
    specs = build_specs(config)
    ledger = BudgetLedger(global_cap=config.global_epsilon_cap)
    matchmaker = Matchmaker(
        ledger=ledger,
        noise=noise_source(config, streams["noise"]),
        sampling=streams["sampling"],
        q=config.subsample_rate,
        book=BundleBook(limit=config.rate_limit, scope=config.rate_limit_scope),
        max_wait_rounds=config.max_wait_rounds,
    )
    for spec in specs.values():
        matchmaker.register_spec(spec)
    searchers = build_searchers(config, streams)
    plan = build_attack(config, specs)
    metrics = RunMetrics(name=config.name, seed=seed)
    kickbacks: Counter[str] = Counter()

    for r in range(config.rounds if rounds is None else rounds):
        try:
            chain = _run_round(
                r, config, chain, specs, matchmaker, searchers, plan, streams, metrics, kickbacks
            )
        except (HintweaverError, ArithmeticError) as e:
            raise HintweaverError(f"round {r}: {e}") from e

    metrics.kickbacks = dict(sorted(kickbacks.items()))
    metrics.budget_trace = ledger.trace()
    metrics.budget_spent = ledger.spent
    logger.info(
        "scenario {} finished (rounds={}, gross={}, kickback={}, epsilon={:.4g})",
        config.name,
        len(metrics.rounds),
        metrics.gross,
        metrics.kickback,
        metrics.budget_spent,
    )
    return metrics


def _run_round(
    r: int,
    config: ScenarioConfig,
    chain: ChainState,
    specs: dict[str, AggSpec],
    matchmaker: Matchmaker,
    searchers: list[Searcher],
    plan: AttackPlan | None,
    streams: dict[str, np.random.Generator],
    metrics: RunMetrics,
    kickbacks: Counter[str],
) -> ChainState:
    submitted = 0
    for tx in draw_users(config, r, streams["population"], chain, specs):
        submitted += matchmaker.submit_transaction(tx).accepted
    sybil_ids: set[str] = set()
    if plan is not None:
        for tx in craft_sybil_batch(plan, r):
            if matchmaker.submit_transaction(tx).accepted:
                sybil_ids.add(tx.txid)
                submitted += 1

    spent_before = matchmaker.ledger.spent
    release = matchmaker.release_round()
    pending = dict(matchmaker.pending)

    templates: dict[str, int] = {}
    for searcher in searchers:
        templates[searcher.searcher_id] = _propose_all(
            matchmaker, searcher, release, chain, config.rate_limit_scope
        )

    settlement = matchmaker.settle_round(chain)

    per_searcher: dict[str, list[int]] = {s.searcher_id: [0, 0, 0, 0] for s in searchers}
    for bundle in settlement.winners:
        row = per_searcher[bundle.template.searcher_id]
        row[0] += 1
        row[1] += bundle.gross_profit
        row[2] += bundle.gas_paid
        row[3] += bundle.kickback
    for searcher in searchers:
        wins, gross, gas, kickback = per_searcher[searcher.searcher_id]
        metrics.reports.append(
            StrategyReport(
                strategy=searcher.kind.value,
                searcher_id=searcher.searcher_id,
                round=r,
                templates=templates[searcher.searcher_id],
                won=wins > 0,
                gross=gross,
                gas=gas,
                kickback=kickback,
            )
        )
    kickbacks.update(settlement.kickbacks)

    observed = [
        float(t.amount_in)
        for txid in settlement.settled
        if txid not in sybil_ids
        for t in pending[txid].trades
    ]
    for searcher in searchers:
        searcher.observe(observed)

    if plan is not None:
        estimate = infer_victim_value(release, plan, r)
        metrics.attack.append(
            AttackRound(
                round=r,
                estimate=None if estimate is None else estimate.value,
                truth=_honest_total(list(pending.values()), plan.spec, sybil_ids),
                sybils_settled=len(sybil_ids & set(settlement.settled)),
            )
        )

    gross = settlement.gross_extracted
    gas = sum(w.gas_paid for w in settlement.winners)
    kickback = sum(w.kickback for w in settlement.winners)
    metrics.rounds.append(
        RoundRecord(
            round=r,
            digest=release.digest(),
            pending=len(pending),
            submitted=submitted,
            satisfied=sum(a.satisfied for a in release.aggregates),
            templates=sum(templates.values()),
            winners=len(settlement.winners),
            standalone=len(settlement.standalone),
            deferred=len(settlement.deferred),
            dropped=len(settlement.dropped),
            gross=gross,
            gas=gas,
            kickback=kickback,
            searcher_net=gross - gas - kickback,
            epsilon_spent=matchmaker.ledger.spent - spent_before,
            aggregates={a.spec_id: a.value for a in release.aggregates},
        )
    )
    return settlement.state


@attrs.define(frozen=True)
class StrategyOutcome:
    """What one strategy achieved on one victim: the settled bundle and its best candidate."""

    templates: int = 0
    best_gross: int = 0
    gross: int = 0
    gas: int = 0
    kickback: int = 0

    @property
    def net(self) -> int:
        return self.gross - self.gas - self.kickback


@attrs.define(frozen=True)
class PairedRound:
    round: int
    txid: str
    amount: int
    outcomes: dict[str, StrategyOutcome]


@attrs.define
class PairedResult:
    strategies: tuple[str, ...]
    rounds: list[PairedRound] = attrs.field(factory=list)

    def column(self, strategy: str, metric: str = "net") -> np.ndarray:
        return np.asarray([getattr(r.outcomes[strategy], metric) for r in self.rounds], dtype=float)

    def mean(self, strategy: str, metric: str = "net") -> float:
        values = self.column(strategy, metric)
        return float(values.mean()) if len(values) else math.nan


def _victim(txs: Sequence[Transaction], victim_spec: str | None) -> Transaction | None:
    for tx in sorted(txs, key=lambda t: t.txid):
        if victim_spec is None or tx.opted_into(victim_spec):
            return tx
    return None


def run_paired_rounds(
    config: ScenarioConfig,
    strategies: Sequence[str],
    rounds: int,
    *,
    seed: int | None = None,
    victim_spec: str | None = None,
    k: int | None = None,
) -> PairedResult:
    """
    Paired comparison of strategies, one victim per round.

    Every round draws a fresh population on the scenario's initial chain and releases its hints on
    a fresh ledger. Each strategy then bids on the same victim (the first user by id, or the first
    one opted into `victim_spec`) with an identically seeded random stream, and settlement sees
    only that strategy's templates.
    """
    seed = config.seed if seed is None else seed
    chain = build_chain(config)
    specs = build_specs(config)
    ordered_specs = [specs[s] for s in sorted(specs)]
    k = config.rate_limit if k is None else k
    marginal = config.population.marginal_prior(config.token_scale)
    result = PairedResult(strategies=tuple(strategies))

    for r in range(rounds):
        streams = derive_streams([seed, r], ["population", "noise", "sampling", "searcher"])
        users = draw_users(config, r, streams["population"], chain, specs)
        victim = _victim(users, victim_spec)
        if victim is None:
            continue
        release = release_hints(
            users,
            ordered_specs,
            config.subsample_rate,
            noise_source(config, streams["noise"]),
            streams["sampling"],
            BudgetLedger(global_cap=config.global_epsilon_cap),
            round=r,
        )
        try:
            _, post = apply_trades(chain, victim.trades)
        except HintweaverError:
            continue
        searcher_seed = int(streams["searcher"].integers(2**63))

        outcomes = {}
        for name in strategies:
            searcher = Searcher(
                params=SearcherParams(searcher_id=name, gas=config.gas.model()),
                kind=name,
                rng=np.random.default_rng(searcher_seed),
                k=k,
                prior=marginal,
            )
            templates = searcher.propose(release, chain, targets={victim.txid}, k=k)
            best_gross = 0
            for template in templates:
                try:
                    gross, _ = template.program.execute(chain, post, victim)
                except HintweaverError:
                    continue
                best_gross = max(best_gross, gross)
            winner = settle_round(chain, [victim], templates).winner
            outcomes[name] = StrategyOutcome(
                templates=len(templates),
                best_gross=best_gross,
                gross=winner.gross_profit if winner else 0,
                gas=winner.gas_paid if winner else 0,
                kickback=winner.kickback if winner else 0,
            )
        result.rounds.append(
            PairedRound(
                round=r, txid=victim.txid, amount=victim.trades[0].amount_in, outcomes=outcomes
            )
        )
    logger.info(
        "paired rounds finished (strategies={}, rounds={})",
        ",".join(strategies),
        len(result.rounds),
    )
    return result
