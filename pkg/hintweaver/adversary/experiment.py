from __future__ import annotations

import enum
import math
from collections.abc import Sequence

import attrs
import numpy as np
from loguru import logger
from scipy import stats

from hintweaver.adversary.sybil import AttackPlan, craft_sybil_batch, infer_victim_value
from hintweaver.dp.ledger import BudgetLedger
from hintweaver.dp.noise import NoiseSource, ZeroNoise
from hintweaver.dp.sampling import amplify_by_subsampling
from hintweaver.errors import ParameterError
from hintweaver.matchmaker.curator import release_hints
from hintweaver.models.hints import HintConfig, HintField, Transaction
from hintweaver.models.market import Direction, Trade
from hintweaver.models.privacy import PrivacyParams
from hintweaver.searchers.priors import AmountPrior
from hintweaver.utils import derive_streams

ERROR_QUANTILES = (0.05, 0.5, 0.95)


class AttackVariant(str, enum.Enum):
    ISOLATION = "isolation"
    BACKGROUND = "background"


@attrs.define(frozen=True)
class AttackSetup:
    plan: AttackPlan
    victim_prior: AmountPrior
    background_users: int = 0
    background_prior: AmountPrior | None = None

    def honest_expected(self, variant: AttackVariant) -> float:
        if variant is AttackVariant.ISOLATION:
            return 0.0
        prior = self.background_prior or self.victim_prior
        cap = self.plan.spec.clamp_cap or math.inf
        return self.background_users * min(prior.mean, cap)


@attrs.define(frozen=True, eq=False)
class AttackOutcome:
    variant: AttackVariant
    q: float
    estimates: np.ndarray
    truths: np.ndarray
    skipped: int
    epsilon_prime: float
    epsilon_charged: float
    mae_ci: tuple[float, float] = (math.nan, math.nan)

    @property
    def trials(self) -> int:
        return len(self.estimates)

    @property
    def errors(self) -> np.ndarray:
        return np.abs(self.estimates - self.truths)

    @property
    def mae(self) -> float:
        return float(self.errors.mean()) if self.trials else math.nan

    @property
    def error_quantiles(self) -> dict[str, float]:
        if not self.trials:
            return {f"p{int(p * 100)}": math.nan for p in ERROR_QUANTILES}
        values = np.quantile(self.errors, ERROR_QUANTILES)
        return {f"p{int(p * 100)}": float(v) for p, v in zip(ERROR_QUANTILES, values)}

    def summary(self) -> dict[str, object]:
        return {
            "variant": self.variant.value,
            "q": self.q,
            "trials": self.trials,
            "skipped": self.skipped,
            "mae": self.mae,
            "mae_ci": list(self.mae_ci),
            "error_quantiles": self.error_quantiles,
            "epsilon_prime": self.epsilon_prime,
            "epsilon_charged": self.epsilon_charged,
        }


def mae_interval(
    errors: np.ndarray, rng: np.random.Generator, confidence: float = 0.99, resamples: int = 2000
) -> tuple[float, float]:
    if len(errors) < 2:
        return (math.nan, math.nan)
    res = stats.bootstrap(
        (errors,),
        np.mean,
        n_resamples=resamples,
        confidence_level=confidence,
        method="percentile",
        random_state=rng,
    )
    return (float(res.confidence_interval.low), float(res.confidence_interval.high))


def _honest_tx(setup: AttackSetup, txid: str, amount: int) -> Transaction:
    plan = setup.plan
    trade = Trade(
        pair=plan.pair.oriented(Direction.SELL_TOKEN2), protocol=plan.protocol, amount_in=amount
    )
    config = HintConfig(plain_fields={HintField.PAIR, HintField.PROTOCOL}, agg_specs=(plan.spec,))
    return Transaction(txid=txid, sender=txid, trades=(trade,), hint_config=config)


def _draw_amounts(prior: AmountPrior, rng: np.random.Generator, size: int) -> list[int]:
    return [max(1, int(round(v))) for v in prior.sample(rng, size)]


def run_attack_trial(
    setup: AttackSetup,
    q: float,
    seed: Sequence[int],
    *,
    variant: AttackVariant = AttackVariant.ISOLATION,
    noise_enabled: bool = True,
) -> tuple[float | None, float, float]:
    """
    One submit → release → infer cycle. Returns (estimate or None, clamped truth, ε charged).

    `seed` fixes the victim, the background users, the noise and the subsample, so the same seed
    under different `q` gives a paired trial.
    """
    streams = derive_streams(seed, ["population", "noise", "sampling"])
    plan = setup.plan
    cap = plan.spec.clamp_cap or math.inf

    victim_amount = _draw_amounts(setup.victim_prior, streams["population"], 1)[0]
    pending = craft_sybil_batch(plan)
    pending.append(_honest_tx(setup, "victim", victim_amount))
    if variant is AttackVariant.BACKGROUND and setup.background_users:
        prior = setup.background_prior or setup.victim_prior
        amounts = _draw_amounts(prior, streams["population"], setup.background_users)
        pending.extend(_honest_tx(setup, f"honest-{i:05d}", a) for i, a in enumerate(amounts))

    noise: NoiseSource = streams["noise"] if noise_enabled else ZeroNoise()
    ledger = BudgetLedger(global_cap=math.inf)
    release = release_hints(pending, [plan.spec], q, noise, streams["sampling"], ledger)
    estimate = infer_victim_value(release, plan, honest_expected=setup.honest_expected(variant))
    return (
        None if estimate is None else estimate.value,
        min(float(victim_amount), cap),
        ledger.spent,
    )


def run_attack_experiment(
    setup: AttackSetup,
    qs: Sequence[float],
    trials: int,
    *,
    seed: int = 0,
    variant: AttackVariant = AttackVariant.ISOLATION,
    noise_enabled: bool = True,
    confidence: float = 0.99,
) -> list[AttackOutcome]:
    """
    Repeat the sybil attack `trials` times for every subsample rate in `qs`.

    Trial t uses the same seed for every q, so the per-q error samples are paired.
    """
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials!r}")
    variant = AttackVariant(variant)
    boot_rng = np.random.default_rng([seed, len(qs), trials])
    outcomes = []
    for q in qs:
        estimates, truths, charged = [], [], []
        skipped = 0
        for t in range(trials):
            estimate, truth, spent = run_attack_trial(
                setup, q, [seed, t], variant=variant, noise_enabled=noise_enabled
            )
            charged.append(spent)
            if estimate is None:
                skipped += 1
                continue
            estimates.append(estimate)
            truths.append(truth)
        est = np.asarray(estimates, dtype=float)
        tru = np.asarray(truths, dtype=float)
        query = amplify_by_subsampling(PrivacyParams(epsilon=setup.plan.spec.epsilon_query), q)
        outcome = AttackOutcome(
            variant=variant,
            q=float(q),
            estimates=est,
            truths=tru,
            skipped=skipped,
            epsilon_prime=query.epsilon_prime,
            epsilon_charged=float(np.mean(charged)),
            mae_ci=mae_interval(np.abs(est - tru), boot_rng, confidence),
        )
        logger.info(
            "attack finished (variant={}, q={}, trials={}, skipped={}, mae={:.4g})",
            variant.value,
            q,
            outcome.trials,
            skipped,
            outcome.mae,
        )
        outcomes.append(outcome)
    return outcomes
