import math

import numpy as np
from ward import fixture, raises, test

from hintweaver.dp import BudgetLedger, ZeroNoise, sample_size, subsample_indices
from hintweaver.errors import HintweaverError, ParameterError
from hintweaver.market import apply_trade, backrun
from hintweaver.matchmaker import BundleBook, arrival_order, release_hints, settle_round
from hintweaver.models.hints import (
    AggregateRelease,
    AggSpec,
    BundleStatus,
    BundleTemplate,
    CountCondition,
    HintConfig,
    HintField,
    RateLimitScope,
    Transaction,
    TxFilter,
)
from hintweaver.models.market import ChainState, Direction, Pair, PoolState, Trade
from hintweaver.searchers.programs import StaticBackrun
from hintweaver.state.round import Matchmaker, RoundPhase

PAIR = Pair.parse("ETH/USDC")
VOLUME = AggSpec(
    spec_id="volume",
    query="sum",
    filter=TxFilter(pair="ETH/USDC"),
    condition=CountCondition(3, 2),
    epsilon_cond=1.0,
    epsilon_query=1.0,
    clamp_cap=50_000,
)
COUNT = AggSpec(
    spec_id="flow", query="count", filter=TxFilter(pair="ETH/USDC"), condition=CountCondition(3, 2)
)


def user(i: int, amount: int, specs=(VOLUME,), sender: str | None = None) -> Transaction:
    return Transaction(
        txid=f"tx{i:02d}",
        sender=sender or f"user{i:02d}",
        trades=(Trade(pair=PAIR, protocol="uniswap", amount_in=amount),),
        hint_config=HintConfig(plain_fields={HintField.PAIR, HintField.PROTOCOL}, agg_specs=specs),
    )


@fixture
def pending():
    opted = [user(i, 10_000 * (i + 1)) for i in range(6)]
    plain = [user(10 + i, 5_000, specs=()) for i in range(3)]
    return opted + plain


@fixture
def chain():
    return ChainState.from_pools(
        [
            PoolState("uniswap", PAIR, 1_000_000, 1_000_000),
            PoolState("sushiswap", PAIR, 1_000_000, 1_000_000),
        ]
    )


def static_for(state: ChainState, victim: Transaction) -> StaticBackrun:
    trade = victim.trades[0]
    pool = state.pool(trade.protocol, trade.pair)
    plan = backrun(trade.pair, trade.protocol, trade.amount_in, pool.l1, pool.l2, state)
    return StaticBackrun(PAIR, *plan.route, plan.amount_in)


@test("arrival order sorts by sender then txid")
def _():
    txs = [user(2, 10, sender="b"), user(1, 10, sender="b"), user(3, 10, sender="a")]
    assert [t.txid for t in arrival_order(txs)] == ["tx03", "tx01", "tx02"]


@test("noiseless release reports the clamped opted-in sum and hides amounts")
def _(txs=pending):
    ledger = BudgetLedger(global_cap=10.0)
    release = release_hints(txs, [VOLUME], 1.0, ZeroNoise(), np.random.default_rng(0), ledger)
    agg = release.aggregate("volume")
    assert agg.satisfied
    assert agg.value == 10_000 + 20_000 + 30_000 + 40_000 + 50_000 + 50_000
    assert agg.clamp_cap == 50_000
    assert all(h.first.amount is None for h in release.plain_hints)
    assert release.hint("tx00").first.protocol == "uniswap"
    assert [h.txid for h in release.opted_in("volume")] == [f"tx{i:02d}" for i in range(6)]
    assert math.isclose(ledger.spent, 2.0)
    assert math.isclose(agg.epsilon_charged, 2.0)


@test("condition below threshold withholds the aggregate but still charges the counts")
def _(txs=pending):
    ledger = BudgetLedger(global_cap=10.0)
    only_opted = [t for t in txs if t.hint_config.agg_specs]
    rng = np.random.default_rng(0)
    release = release_hints(only_opted, [VOLUME], 1.0, ZeroNoise(), rng, ledger)
    agg = release.aggregate("volume")
    assert not agg.satisfied
    assert agg.value is None
    assert math.isclose(ledger.spent, VOLUME.epsilon_cond)
    assert [e.label for e in ledger.entries] == ["volume:cond:in", "volume:cond:out"]


@test("exhausted budget withholds the release without charging")
def _(txs=pending):
    ledger = BudgetLedger(global_cap=0.5)
    release = release_hints(txs, [VOLUME], 1.0, ZeroNoise(), np.random.default_rng(0), ledger)
    agg = release.aggregate("volume")
    assert agg.exhausted
    assert not agg.satisfied
    assert ledger.spent == 0.0


@test("per-round charge sums amplified condition and query budgets")
def _(txs=pending):
    ledger = BudgetLedger(global_cap=10.0)
    release = release_hints(
        txs, [COUNT, VOLUME], 0.5, ZeroNoise(), np.random.default_rng(4), ledger, round=2
    )
    assert release.q == 0.5
    expected = sum(a.epsilon_charged for a in release.aggregates)
    assert math.isclose(ledger.spent_in_round(2), expected)
    assert ledger.spent <= ledger.global_cap
    eps_half = math.log1p(0.5 * math.expm1(0.5))
    assert all(b.epsilon_prime == eps_half for a in release.aggregates for b in a.condition_budgets)


@test("a budget that covers the condition but not the query charges nothing")
def _(txs=pending):
    ledger = BudgetLedger(global_cap=1.5)
    release = release_hints(txs, [VOLUME], 1.0, ZeroNoise(), np.random.default_rng(0), ledger)
    agg = release.aggregate("volume")
    assert agg.exhausted
    assert not agg.satisfied
    assert ledger.spent == 0.0
    assert not ledger.entries


@test("every spec of a round reads the same subsample of round(q·n) transactions")
def _():
    flow = AggSpec(
        spec_id="flow",
        query="count",
        filter=TxFilter(pair="ETH/USDC"),
        condition=CountCondition(1, 1),
    )
    total = AggSpec(
        spec_id="total",
        query="sum",
        filter=TxFilter(pair="ETH/USDC"),
        condition=CountCondition(1, 1),
        clamp_cap=10**9,
    )
    opted = [user(i, 1_000 * (i + 1), specs=(flow, total)) for i in range(8)]
    txs = opted + [user(20 + i, 500, specs=()) for i in range(4)]
    ordered = arrival_order(txs)
    for seed in range(10):
        idx = subsample_indices(len(ordered), 0.5, np.random.default_rng(seed))
        assert len(idx) == sample_size(12, 0.5) == 6
        sample = [ordered[i] for i in idx]
        expected_in = [tx for tx in sample if tx.hint_config.agg_specs]
        expected_out = len(sample) - len(expected_in)

        ledger = BudgetLedger(global_cap=100.0)
        rng = np.random.default_rng(seed)
        release = release_hints(txs, [flow, total], 0.5, ZeroNoise(), rng, ledger)
        count, volume = release.aggregate("flow"), release.aggregate("total")
        satisfied = bool(expected_in) and expected_out >= 1
        assert count.satisfied == volume.satisfied == satisfied
        if satisfied:
            assert count.value == len(expected_in)
            assert volume.value == sum(tx.trades[0].amount_in for tx in expected_in)


@test("dropping one transaction moves a count by at most 1 and a sum by at most the cap")
def _():
    opted = [user(i, 10_000 * (i + 1), specs=(VOLUME, COUNT)) for i in range(6)]
    txs = opted + [user(10 + i, 5_000, specs=()) for i in range(3)]

    def noiseless(pending):
        ledger = BudgetLedger(global_cap=100.0)
        rng = np.random.default_rng(0)
        return release_hints(pending, [VOLUME, COUNT], 1.0, ZeroNoise(), rng, ledger)

    full = noiseless(txs)
    for dropped in txs:
        fewer = noiseless([tx for tx in txs if tx is not dropped])
        for spec_id, bound in (("flow", 1.0), ("volume", VOLUME.clamp_cap)):
            before, after = full.aggregate(spec_id), fewer.aggregate(spec_id)
            assert before.satisfied and after.satisfied
            assert abs(before.value - after.value) <= bound


@test("hint records check their fields on construction")
def _():
    with raises(ParameterError):
        CountCondition(0, 1)
    with raises(ParameterError):
        CountCondition(1, 0)
    with raises(ParameterError):
        AggSpec(spec_id="v", query="sum")
    with raises(ParameterError):
        AggregateRelease("v", VOLUME.query, VOLUME.filter, True)
    with raises(ParameterError):
        AggregateRelease("v", VOLUME.query, VOLUME.filter, False, 10.0)
    with raises(ParameterError):
        BundleTemplate("s", "tx00", None, rebate_percent=101)
    assert AggSpec(spec_id="n", query="count").clamp_cap is None
    assert BundleTemplate("s", "tx00", None).rebate_percent == 50


@test("zero subsample rate releases nothing and charges nothing")
def _(txs=pending):
    ledger = BudgetLedger(global_cap=10.0)
    release = release_hints(txs, [VOLUME], 0.0, ZeroNoise(), np.random.default_rng(0), ledger)
    assert not release.aggregate("volume").satisfied
    assert ledger.spent == 0.0


@test("every searcher receives a byte-identical release")
def _(txs=pending):
    def publish():
        ledger = BudgetLedger(global_cap=10.0)
        return release_hints(
            txs, [VOLUME], 0.5, np.random.default_rng(9), np.random.default_rng(9), ledger
        )

    first, second = publish(), publish()
    assert first == second
    assert first.encode() == second.encode()
    assert first.digest() == second.digest()


@test("highest kickback wins; totals are conserved")
def _(state: ChainState = chain, txs=pending):
    victim = txs[3]
    program = static_for(state, victim)
    templates = [
        BundleTemplate("low", victim.txid, program, rebate_percent=10),
        BundleTemplate("high", victim.txid, program, rebate_percent=90),
    ]
    result = settle_round(state, [victim], templates)
    winner = result.winner
    assert winner.template.searcher_id == "high"
    assert winner.kickback == winner.gross_profit * 90 // 100
    assert winner.gross_profit == winner.kickback + winner.searcher_net + winner.gas_paid
    assert result.kickbacks == {victim.sender: winner.kickback}
    assert result.settled == (victim.txid,)


@test("equal kickbacks go to the earliest template")
def _(state: ChainState = chain, txs=pending):
    victim = txs[3]
    program = static_for(state, victim)
    templates = [BundleTemplate(sid, victim.txid, program) for sid in ("first", "second")]
    assert settle_round(state, [victim], templates).winner.template.searcher_id == "first"


@test("a bundle that loses money is discarded and the victim runs alone")
def _(state: ChainState = chain, txs=pending):
    victim = txs[0]
    wrong = StaticBackrun(PAIR, "uniswap", "sushiswap", 50_000)
    result = settle_round(state, [victim], [BundleTemplate("s", victim.txid, wrong)])
    assert result.winner is None
    assert result.discarded == 1
    assert result.standalone == (victim.txid,)
    _, alone = apply_trade(state, victim.trades[0])
    assert result.state.pools == alone.pools


@test("victims without a winner wait out max_wait_rounds")
def _(state: ChainState = chain, txs=pending):
    victim = txs[0]
    result = settle_round(state, [victim], [], max_wait_rounds=1)
    assert result.deferred == (victim.txid,)
    assert result.state == state
    result = settle_round(state, [victim], [], waited={victim.txid: 1}, max_wait_rounds=1)
    assert result.standalone == (victim.txid,)


@test("a reverting victim is dropped along with its bundles")
def _(state: ChainState = chain):
    trade = Trade(pair=PAIR, protocol="uniswap", amount_in=1000, min_amount_out=1 << 64)
    victim = Transaction("bad", "mallory", (trade,))
    template = BundleTemplate("s", "bad", static_for(state, user(0, 40_000)))
    result = settle_round(state, [victim], [template])
    assert result.dropped == ("bad",)
    assert result.winner is None
    assert result.state == state


@test("settling a transaction twice raises")
def _(state: ChainState = chain, txs=pending):
    with raises(HintweaverError):
        settle_round(state, [txs[0]], [], already_settled={txs[0].txid})


@test("rate limit caps templates per searcher per round")
def _():
    book = BundleBook(limit=2)
    known = ["a", "b"]
    statuses = [
        book.submit("s", BundleTemplate("s", txid, None), known) for txid in ("a", "b", "a")
    ]
    assert statuses == [BundleStatus.ACCEPTED, BundleStatus.ACCEPTED, BundleStatus.RATE_LIMITED]
    assert book.submit("t", BundleTemplate("t", "a", None), known) is BundleStatus.ACCEPTED
    assert book.submit("t", BundleTemplate("t", "zz", None), known) is BundleStatus.REJECTED
    assert book.count("s") == 2


@test("per-transaction scope limits each victim separately")
def _():
    book = BundleBook(limit=1, scope=RateLimitScope.PER_TRANSACTION)
    known = ["a", "b"]
    assert book.submit("s", BundleTemplate("s", "a", None), known) is BundleStatus.ACCEPTED
    assert book.submit("s", BundleTemplate("s", "b", None), known) is BundleStatus.ACCEPTED
    assert book.submit("s", BundleTemplate("s", "a", None), known) is BundleStatus.RATE_LIMITED
    assert book.count("s") == 2
    assert book.count("s", "a") == 1


@test("matchmaker walks its round phases and rejects out-of-phase calls")
def _(state: ChainState = chain, txs=pending):
    mm = Matchmaker(
        ledger=BudgetLedger(global_cap=10.0),
        noise=ZeroNoise(),
        sampling=np.random.default_rng(0),
    )
    assert mm.phase is RoundPhase.INGEST
    assert all(mm.submit_transaction(tx).accepted for tx in txs)
    duplicate = mm.submit_transaction(txs[0])
    assert not duplicate.accepted
    assert duplicate.reason == "duplicate transaction id"

    victim = txs[3]
    template = BundleTemplate("s", victim.txid, static_for(state, victim))
    assert mm.accept_bundle("s", template) is BundleStatus.REJECTED

    release = mm.release_round()
    assert mm.phase is RoundPhase.BUNDLES
    assert mm.current_release is release
    assert release.aggregate("volume").satisfied
    assert not mm.submit_transaction(user(50, 1000)).accepted
    assert mm.accept_bundle("s", template) is BundleStatus.ACCEPTED

    settlement = mm.settle_round(state)
    assert mm.phase is RoundPhase.INGEST
    assert mm.round == 1
    assert settlement.winner.victim.txid == victim.txid
    assert not mm.pending
    assert victim.txid in mm.settled_ids
    assert not mm.submit_transaction(victim).accepted


@test("matchmaker refuses conflicting spec definitions and public aggregate fields")
def _():
    mm = Matchmaker(
        ledger=BudgetLedger(global_cap=10.0),
        noise=ZeroNoise(),
        sampling=np.random.default_rng(0),
    )
    mm.register_spec(VOLUME)
    clash = AggSpec(spec_id="volume", query="sum", clamp_cap=1.0)
    assert not mm.submit_transaction(user(1, 100, specs=(clash,))).accepted
    leaky = Transaction(
        txid="leak",
        sender="x",
        trades=(Trade(pair=PAIR, protocol="uniswap", amount_in=100),),
        hint_config=HintConfig(
            plain_fields={HintField.PAIR, HintField.AMOUNT}, agg_specs=(VOLUME,)
        ),
    )
    assert not mm.submit_transaction(leaky).accepted
    assert mm.submit_transaction(user(2, 100)).accepted


@test("direction withheld means the hinted pair is canonical")
def _():
    sell_eth = Trade(pair=PAIR.oriented(Direction.SELL_TOKEN1), protocol="uniswap", amount_in=10)
    tx = Transaction("t", "s", (sell_eth,), HintConfig(plain_fields={"pair", "protocol"}))
    ledger = BudgetLedger(global_cap=1.0)
    release = release_hints([tx], [], 1.0, ZeroNoise(), np.random.default_rng(0), ledger)
    assert release.hint("t").first.pair == PAIR
    assert release.hint("t").first.direction is None
