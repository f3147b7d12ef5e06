import math

import attrs
import numpy as np
from ward import fixture, raises, test

from hintweaver.adversary import (
    AttackPlan,
    AttackSetup,
    AttackVariant,
    craft_sybil_batch,
    infer_victim_value,
    mae_interval,
    run_attack_experiment,
    run_attack_trial,
)
from hintweaver.adversary.sybil import UNREACHABLE_OUT
from hintweaver.dp import amplify_by_subsampling
from hintweaver.errors import ParameterError
from hintweaver.matchmaker import settle_round
from hintweaver.models.hints import AggregateRelease, AggSpec, CountCondition, HintRelease, TxFilter
from hintweaver.models.market import ChainState, Pair, PoolState
from hintweaver.models.privacy import PrivacyParams, QueryKind
from hintweaver.searchers import AmountPrior

PAIR = Pair.parse("ETH/USDC")
CAP = 1_000_000.0
VOLUME = AggSpec(
    spec_id="volume",
    query="sum",
    filter=TxFilter(pair="ETH/USDC", protocol="uniswap"),
    condition=CountCondition(5, 5),
    clamp_cap=CAP,
)


@fixture
def plan():
    return AttackPlan(spec=VOLUME, pair=PAIR, protocol="uniswap", sybil_count=50, decoy_count=50)


@fixture
def attack_setup(p: AttackPlan = plan):
    return AttackSetup(
        plan=p,
        victim_prior=AmountPrior.lognormal(13.0, 0.5),
        background_users=20,
        background_prior=AmountPrior.lognormal(12.0, 0.5),
    )


@test("sybil batch carries opted-in sybils and opted-out decoys")
def _(p: AttackPlan = plan):
    batch = craft_sybil_batch(p, round=3)
    assert len(batch) == 100
    assert sum(tx.opted_into("volume") for tx in batch) == 50
    assert batch[0].txid == "sybil-tx-3-00000"
    assert batch[-1].txid == "sybil-decoy-3-00049"
    assert len({tx.txid for tx in batch}) == 100
    assert all(tx.trades[0].min_amount_out == UNREACHABLE_OUT for tx in batch)
    assert p.known_total == 50.0
    assert set(p.known_values(3)) == {tx.txid for tx in batch if tx.opted_into("volume")}


@test("every sybil reverts at settlement and is dropped")
def _(p: AttackPlan = plan):
    state = ChainState.from_pools([PoolState("uniswap", PAIR, 10**8, 10**8)])
    batch = craft_sybil_batch(p)
    result = settle_round(state, batch, [])
    assert len(result.dropped) == 100
    assert not result.settled
    assert result.state == state


@test("the attack only targets sum aggregates")
def _():
    count = AggSpec(spec_id="n", query="count", filter=TxFilter(pair="ETH/USDC"))
    with raises(ParameterError):
        AttackPlan(spec=count, pair=PAIR, protocol="uniswap")
    with raises(ParameterError):
        AttackPlan(spec=VOLUME, pair=PAIR, protocol="uniswap", sybil_count=-1)


@test("a sybil batch needs at least one sybil")
def _():
    empty = AttackPlan(spec=VOLUME, pair=PAIR, protocol="uniswap", sybil_count=0, decoy_count=5)
    with raises(ParameterError):
        craft_sybil_batch(empty)
    assert len(craft_sybil_batch(attrs.evolve(empty, sybil_count=1))) == 6


@test("inference subtracts the known total and rescales below full sampling")
def _(p: AttackPlan = plan):
    flt = VOLUME.filter
    agg = AggregateRelease("volume", QueryKind.SUM, flt, True, 1_050.0, clamp_cap=CAP)
    full = HintRelease(round=0, q=1.0, aggregates=(agg,))
    assert infer_victim_value(full, p).value == 1_000.0
    assert infer_victim_value(full, p, honest_expected=400.0).value == 600.0
    half = HintRelease(round=0, q=0.5, aggregates=(agg,))
    estimate = infer_victim_value(half, p)
    assert estimate.value == 2_050.0
    assert estimate.variance_inflated
    withheld = AggregateRelease("volume", QueryKind.SUM, flt, False, clamp_cap=CAP)
    assert infer_victim_value(HintRelease(round=0, q=1.0, aggregates=(withheld,)), p) is None


@test("a noiseless full-sample release gives the victim away exactly")
def _(s: AttackSetup = attack_setup):
    [outcome] = run_attack_experiment(s, [1.0], 50, seed=1, noise_enabled=False)
    assert outcome.trials == 50
    assert outcome.skipped == 0
    assert outcome.mae == 0.0
    assert np.all(outcome.truths <= CAP)


@test("trials repeat under the same seed")
def _(s: AttackSetup = attack_setup):
    assert run_attack_trial(s, 0.5, [4, 2]) == run_attack_trial(s, 0.5, [4, 2])


@test("the victim gets harder to read as the subsample rate falls")
def _(s: AttackSetup = attack_setup):
    full, half, quarter = run_attack_experiment(s, [1.0, 0.5, 0.25], 10_000, seed=7)

    assert full.skipped == 0
    assert abs(full.mae - CAP) / CAP < 0.1
    assert full.epsilon_prime == 1.0
    assert math.isclose(full.epsilon_charged, 2.0)
    low, high = full.mae_ci
    assert low < full.mae < high

    assert half.mae_ci[0] > full.mae_ci[1]
    assert quarter.mae_ci[0] > half.mae_ci[1]
    assert quarter.mae >= half.mae >= full.mae
    for outcome in (full, half, quarter):
        amplified = amplify_by_subsampling(PrivacyParams(epsilon=1.0), outcome.q)
        assert outcome.epsilon_prime == amplified.epsilon_prime
    assert set(half.error_quantiles) == {"p5", "p50", "p95"}


@test("without decoys the opted-out threshold is never met")
def _(s: AttackSetup = attack_setup):
    lonely = AttackSetup(
        plan=AttackPlan(spec=VOLUME, pair=PAIR, protocol="uniswap", sybil_count=50),
        victim_prior=s.victim_prior,
    )
    [outcome] = run_attack_experiment(lonely, [1.0], 20, noise_enabled=False)
    assert outcome.skipped == 20
    assert outcome.trials == 0
    assert math.isnan(outcome.mae)


@test("background users are discounted by their expected clamped amount")
def _(s: AttackSetup = attack_setup):
    assert s.honest_expected(AttackVariant.ISOLATION) == 0.0
    expected = 20 * math.exp(12.0 + 0.125)
    assert math.isclose(s.honest_expected(AttackVariant.BACKGROUND), expected)
    [outcome] = run_attack_experiment(s, [1.0], 50, variant="background", noise_enabled=False)
    assert outcome.variant is AttackVariant.BACKGROUND
    assert outcome.mae > 0


@test("experiments need at least one trial")
def _(s: AttackSetup = attack_setup):
    with raises(ParameterError):
        run_attack_experiment(s, [1.0], 0)


@test("bootstrap interval needs two errors")
def _():
    low, high = mae_interval(np.array([3.0]), np.random.default_rng(0))
    assert math.isnan(low) and math.isnan(high)
