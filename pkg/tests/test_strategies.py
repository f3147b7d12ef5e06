import math

import numpy as np
from ward import fixture, raises, test

from hintweaver.dp import BudgetLedger, ZeroNoise
from hintweaver.errors import ParameterError
from hintweaver.market import apply_trade, grid_search_arb
from hintweaver.matchmaker import release_hints, settle_round
from hintweaver.models.hints import (
    AggregateRelease,
    AggSpec,
    CountCondition,
    HintConfig,
    HintField,
    HintRelease,
    PlainHint,
    Transaction,
    TxFilter,
)
from hintweaver.models.market import AppliedTrade, ChainState, Direction, Pair, PoolState, Trade
from hintweaver.models.privacy import QueryKind
from hintweaver.searchers import (
    AmountPrior,
    ContractBackrun,
    CutMode,
    PriorFamily,
    Searcher,
    SearcherParams,
    StaticBackrun,
    StrategyKind,
    brute_force_strategy,
    candidate_amounts,
    contract_backrun_strategy,
    cut_points,
    estimate_prior,
    hint_enhanced_strategy,
    hybrid_strategy,
    posterior_for,
    venue_frequencies,
)

PAIR = Pair.parse("ETH/USDC")
PARAMS = SearcherParams(searcher_id="s")
PRIOR = AmountPrior.lognormal(mu=math.log(20_000), sigma=0.5)
PUBLIC = frozenset({HintField.PAIR, HintField.PROTOCOL, HintField.DIRECTION})


@fixture
def chain():
    return ChainState.from_pools(
        [
            PoolState("uniswap", PAIR, 1_000_000, 1_000_000),
            PoolState("sushiswap", PAIR, 1_000_000, 1_000_000),
        ]
    )


def victim_tx(amount: int, fields=PUBLIC, protocol="uniswap", direction=Direction.SELL_TOKEN2):
    trade = Trade(pair=PAIR.oriented(direction), protocol=protocol, amount_in=amount)
    return Transaction("victim", "alice", (trade,), HintConfig(plain_fields=fields))


def publish(txs, specs=(), noise=None) -> HintRelease:
    ledger = BudgetLedger(global_cap=100.0)
    return release_hints(
        txs, list(specs), 1.0, noise or ZeroNoise(), np.random.default_rng(0), ledger
    )


def best_gross(templates, state, victim) -> int:
    _, post = apply_trade(state, victim.trades[0])
    return max(t.program.execute(state, post, victim)[0] for t in templates)


@test("quantile cuts sit at bucket midpoints")
def _():
    assert np.allclose(cut_points(5), [0.1, 0.3, 0.5, 0.7, 0.9])
    one = candidate_amounts(PRIOR, 1, CutMode.QUANTILES, np.random.default_rng(0))
    assert np.allclose(one, [20_000])
    assert len(candidate_amounts(PRIOR, 0, CutMode.QUANTILES, np.random.default_rng(0))) == 0


@test("sampled candidates repeat under the same seed")
def _():
    a = candidate_amounts(PRIOR, 8, CutMode.SAMPLE, np.random.default_rng(3))
    b = candidate_amounts(PRIOR, 8, CutMode.SAMPLE, np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert np.all(a >= 1)


@test("log-normal fit recovers its parameters within 5%")
def _():
    history = np.random.default_rng(12).lognormal(10.0, 0.5, 20_000)
    fitted = estimate_prior(history, PriorFamily.LOGNORMAL)
    assert abs(fitted.mu - 10.0) / 10.0 < 0.05
    assert abs(fitted.sigma - 0.5) / 0.5 < 0.05


@test("histogram fit covers the history and sums to one")
def _():
    history = np.random.default_rng(1).lognormal(8.0, 0.3, 5_000)
    fitted = estimate_prior(history)
    assert fitted.family is PriorFamily.HISTOGRAM
    assert math.isclose(sum(fitted.masses), 1.0)
    q = fitted.quantile(np.array([0.0, 0.5, 1.0]))
    assert history.min() <= q[1] <= history.max()
    assert q[0] == history.min()
    assert math.isclose(q[2], history.max())


@test("degenerate histories give a point mass or the default")
def _():
    point = estimate_prior([500.0, 500.0, 500.0])
    assert point.is_point
    assert np.allclose(point.quantile(np.array([0.1, 0.9])), 500.0)
    assert estimate_prior([], default=PRIOR) is PRIOR
    with raises(ParameterError):
        estimate_prior([1.0, -2.0])


@test("shifted prior keeps its shape and moves its mean")
def _():
    moved = PRIOR.shifted(50_000)
    assert math.isclose(moved.mean, 50_000)
    assert moved.sigma == PRIOR.sigma
    hist = AmountPrior(family="histogram", edges=(10.0, 20.0, 30.0), masses=(0.5, 0.5))
    assert math.isclose(hist.shifted(40.0).mean, 40.0)


@test("contract settles the exact grid optimum on random victims")
def _():
    rng = np.random.default_rng(77)
    for _ in range(100):
        l1, l2 = (int(v) for v in rng.integers(200_000, 1_000_000, size=2))
        state = ChainState.from_pools(
            [
                PoolState("uniswap", PAIR, l1, l2),
                PoolState("sushiswap", PAIR, int(l1 * rng.uniform(0.9, 1.1)), l2),
            ]
        )
        direction = Direction.SELL_TOKEN2 if rng.random() < 0.5 else Direction.SELL_TOKEN1
        victim = victim_tx(int(rng.integers(1_000, 50_000)), direction=direction)
        templates = contract_backrun_strategy(publish([victim]), state, PARAMS)
        assert len(templates) == 1
        _, post = apply_trade(state, victim.trades[0])
        gross, _ = templates[0].program.execute(state, post, victim)
        oracle = grid_search_arb(post.pool("uniswap", PAIR), post.pool("sushiswap", PAIR))
        assert gross == oracle.expected_profit


@test("contract gross bounds every static candidate")
def _(state: ChainState = chain):
    victim = victim_tx(30_000)
    release = publish([victim])
    contract = contract_backrun_strategy(release, state, PARAMS)
    brute = brute_force_strategy(release, PRIOR, 16, np.random.default_rng(0), state, PARAMS)
    assert brute
    assert best_gross(contract, state, victim) >= best_gross(brute, state, victim)


@test("contract probes every venue when the protocol is withheld")
def _(state: ChainState = chain):
    victim = victim_tx(30_000, fields={HintField.PAIR})
    [template] = contract_backrun_strategy(publish([victim]), state, PARAMS)
    assert isinstance(template.program, ContractBackrun)
    assert template.program.probe_venues == ("sushiswap", "uniswap")
    assert template.gas_units == 100 + 150 * 2
    _, post = apply_trade(state, victim.trades[0])
    assert template.program.execute(state, post, victim)[0] > 0


@test("contract abstains when the pair is withheld")
def _(state: ChainState = chain):
    victim = victim_tx(30_000, fields={HintField.PROTOCOL})
    assert contract_backrun_strategy(publish([victim]), state, PARAMS) == []


@test("hybrid probes the venue the pair trades on most")
def _(state: ChainState = chain):
    sushi = Trade(pair=PAIR, protocol="sushiswap", amount_in=1_000)
    uni = Trade(pair=PAIR, protocol="uniswap", amount_in=1_000)
    history = (AppliedTrade(0, sushi, 1), AppliedTrade(0, sushi, 1), AppliedTrade(0, uni, 1))
    seen = ChainState(pools=state.pools, history=history)
    assert venue_frequencies(seen)["ETH/USDC"]["sushiswap"] == 2
    victim = victim_tx(30_000, fields={HintField.PAIR}, protocol="sushiswap")
    [template] = hybrid_strategy(publish([victim]), seen, PARAMS)
    assert template.program.probe_venues == ("sushiswap",)
    assert template.gas_units == 250
    assert template.strategy == StrategyKind.HYBRID.value
    [fallback] = hybrid_strategy(publish([victim]), state, PARAMS)
    assert fallback.program.probe_venues == ("sushiswap", "uniswap")


@test("brute force emits at most k distinct static templates")
def _(state: ChainState = chain):
    victim = victim_tx(30_000)
    templates = brute_force_strategy(
        publish([victim]), PRIOR, 8, np.random.default_rng(0), state, PARAMS
    )
    assert 0 < len(templates) <= 8
    assert all(isinstance(t.program, StaticBackrun) for t in templates)
    assert all(t.gas_units == 100 for t in templates)
    assert len({t.program for t in templates}) == len(templates)


@test("brute force abstains without the victim's venue or with k = 0")
def _(state: ChainState = chain):
    release = publish([victim_tx(30_000, fields={HintField.PAIR})])
    assert brute_force_strategy(release, PRIOR, 8, np.random.default_rng(0), state, PARAMS) == []
    release = publish([victim_tx(30_000)])
    assert brute_force_strategy(release, PRIOR, 0, np.random.default_rng(0), state, PARAMS) == []


@test("a disclosed amount needs only one exact template")
def _(state: ChainState = chain):
    victim = victim_tx(30_000, fields=PUBLIC | {HintField.AMOUNT})
    release = publish([victim])
    templates = brute_force_strategy(release, PRIOR, 8, np.random.default_rng(0), state, PARAMS)
    assert len(templates) == 1
    contract = contract_backrun_strategy(release, state, PARAMS)
    assert best_gross(templates, state, victim) == best_gross(contract, state, victim)


@test("withheld direction alternates candidate directions")
def _(state: ChainState = chain):
    victim = victim_tx(30_000, fields={HintField.PAIR, HintField.PROTOCOL})
    templates = brute_force_strategy(
        publish([victim]), PRIOR, 8, np.random.default_rng(0), state, PARAMS
    )
    assert {t.program.buy_venue for t in templates} == {"uniswap", "sushiswap"}


@test("without aggregates hint-enhanced matches brute force")
def _(state: ChainState = chain):
    release = publish([victim_tx(30_000)])
    hinted = hint_enhanced_strategy(release, PRIOR, 8, np.random.default_rng(5), state, PARAMS)
    brute = brute_force_strategy(release, PRIOR, 8, np.random.default_rng(5), state, PARAMS)
    assert [t.program for t in hinted] == [t.program for t in brute]


def aggregate_release(total: float, count: float | None, opted: int) -> HintRelease:
    flt = TxFilter(pair="ETH/USDC")
    specs = ("count", "sum") if count is not None else ("sum",)
    hints = tuple(
        PlainHint(
            txid=f"t{i}",
            trades=(PlainHint.of(victim_tx(10)).first,),
            opted_specs=specs,
        )
        for i in range(opted)
    )
    aggregates = [AggregateRelease("sum", QueryKind.SUM, flt, True, total, clamp_cap=1e9)]
    if count is not None:
        aggregates.append(AggregateRelease("count", QueryKind.COUNT, flt, True, count))
    return HintRelease(round=0, q=1.0, plain_hints=hints, aggregates=tuple(aggregates))


@test("posterior centres on the hinted mean when a matching count is released")
def _():
    release = aggregate_release(total=500_000.0, count=10.0, opted=10)
    posterior = posterior_for(release, release.plain_hints[0], PRIOR)
    assert math.isclose(posterior.mean, 50_000)
    assert posterior.sigma == PRIOR.sigma


@test("posterior falls back to the sum minus the others' expected amounts")
def _():
    release = aggregate_release(total=500_000.0, count=None, opted=3)
    posterior = posterior_for(release, release.plain_hints[0], PRIOR)
    assert math.isclose(posterior.mean, 500_000.0 - 2 * PRIOR.mean)


@test("a lone opted-in victim gets a point-mass posterior")
def _():
    release = aggregate_release(total=42_000.0, count=None, opted=1)
    posterior = posterior_for(release, release.plain_hints[0], PRIOR)
    assert posterior.is_point
    assert np.allclose(posterior.quantile(np.array([0.1, 0.9])), 42_000.0)


@test("no covering aggregate leaves the prior untouched")
def _():
    release = aggregate_release(total=500_000.0, count=10.0, opted=10)
    elsewhere = TxFilter(pair="ETH/DAI")
    other = AggregateRelease("sum", QueryKind.SUM, elsewhere, True, 1.0, clamp_cap=1.0)
    moved = HintRelease(round=0, q=1.0, plain_hints=release.plain_hints, aggregates=(other,))
    assert posterior_for(moved, moved.plain_hints[0], PRIOR) is None


@test("a lone victim's exact sum makes hint-enhanced as good as the contract")
def _(state: ChainState = chain):
    spec = AggSpec(
        spec_id="mine",
        query="sum",
        filter=TxFilter(pair="ETH/USDC"),
        condition=CountCondition(1, 1),
        clamp_cap=1_000_000,
    )
    victim = Transaction(
        "victim",
        "alice",
        (Trade(pair=PAIR, protocol="uniswap", amount_in=30_000),),
        HintConfig(plain_fields=PUBLIC, agg_specs=(spec,)),
    )
    bystander = Transaction(
        "bystander",
        "bob",
        (Trade(pair=PAIR, protocol="sushiswap", amount_in=500),),
        HintConfig(plain_fields=PUBLIC),
    )
    release = publish([victim, bystander], specs=[spec])
    assert release.aggregate("mine").satisfied
    hinted = hint_enhanced_strategy(
        release, PRIOR, 4, np.random.default_rng(0), state, PARAMS, targets={"victim"}
    )
    contract = contract_backrun_strategy(release, state, PARAMS, targets={"victim"})
    assert len(hinted) == 1
    assert best_gross(hinted, state, victim) == best_gross(contract, state, victim)


@test("searcher dispatches on its strategy and learns from settled amounts")
def _(state: ChainState = chain):
    victim = victim_tx(30_000)
    release = publish([victim])
    for kind, program in (
        ("contract", ContractBackrun),
        ("hybrid", ContractBackrun),
        ("brute_force", StaticBackrun),
        ("hint_enhanced", StaticBackrun),
    ):
        searcher = Searcher(params=PARAMS, kind=kind, rng=np.random.default_rng(0), prior=PRIOR)
        templates = searcher.propose(release, state, k=4)
        assert templates
        assert all(isinstance(t.program, program) for t in templates)

    learner = Searcher(
        params=PARAMS, kind="brute_force", learn_prior=True, prior_family="lognormal"
    )
    learner.observe([1_000.0, 2_000.0, 4_000.0])
    assert learner.prior.family is PriorFamily.LOGNORMAL
    assert math.isclose(learner.prior.mean, 7_000 / 3)


@test("settlement keeps the most profitable of a searcher's candidates")
def _(state: ChainState = chain):
    victim = victim_tx(30_000)
    templates = brute_force_strategy(
        publish([victim]), PRIOR, 16, np.random.default_rng(0), state, PARAMS
    )
    winner = settle_round(state, [victim], templates).winner
    assert winner.kickback == best_gross(templates, state, victim) * 50 // 100
