from __future__ import annotations

import attrs
import numpy as np
from loguru import logger
from scipy import stats

from hintweaver.dp.mechanisms import Mechanism
from hintweaver.errors import AuditError
from hintweaver.models.privacy import ContributionRecord, Dataset

MIN_TRIALS = 100_000


@attrs.define(frozen=True)
class AuditResult:
    epsilon_hat: float
    raw_epsilon_hat: float
    scored_bins: int
    trials: int
    bins: int
    configured_epsilon: float

    @property
    def slack(self) -> float:
        return self.epsilon_hat - self.configured_epsilon


def clopper_pearson(hits: np.ndarray, trials: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided exact binomial interval for each bin proportion."""
    hits = np.asarray(hits, dtype=float)
    lower = np.where(hits > 0, stats.beta.ppf(alpha / 2, hits, trials - hits + 1), 0.0)
    upper = np.where(hits < trials, stats.beta.ppf(1 - alpha / 2, hits + 1, trials - hits), 1.0)
    return lower, upper


def neighbouring_pair(n: int = 10, label: str = "match") -> tuple[Dataset, Dataset]:
    """
    (X, X′) where X′ holds `n - 1` non-matching entries and X adds one entry carrying `label`.
    """
    base = Dataset(
        entries=tuple(ContributionRecord(txid=f"bg{i}", value=1.0) for i in range(n - 1))
    )
    return base.with_entry(ContributionRecord(txid="target", value=1.0, labels={label})), base


def run_audit(
    mechanism: Mechanism,
    X: Dataset,
    X_prime: Dataset,
    trials: int,
    bins: int,
    rng: np.random.Generator,
    *,
    alpha: float | None = 0.05,
    min_hits: int = 1000,
    mechanism_prime: Mechanism | None = None,
) -> AuditResult:
    if trials < MIN_TRIALS:
        raise AuditError(f"audit needs at least {MIN_TRIALS} trials, got {trials}")
    if bins < 1:
        raise AuditError(f"audit needs at least one bin, got {bins}")
    mechanism_prime = mechanism_prime or mechanism
    if mechanism_prime != mechanism:
        raise AuditError(
            f"mechanism configuration differs between runs: {mechanism!r} vs {mechanism_prime!r}"
        )

    out_x = mechanism.release_many(X, trials, rng)
    out_xp = mechanism_prime.release_many(X_prime, trials, rng)
    lo = min(out_x.min(), out_xp.min())
    hi = max(out_x.max(), out_xp.max())
    edges = np.linspace(lo, hi, bins + 1)
    hits_x, _ = np.histogram(out_x, edges)
    hits_xp, _ = np.histogram(out_xp, edges)

    scored = (hits_x >= min_hits) & (hits_xp >= min_hits)
    n_scored = int(scored.sum())
    if not n_scored:
        logger.warning("no audit bin reached {} hits on both sides", min_hits)
        return AuditResult(0.0, 0.0, 0, trials, bins, mechanism.params.epsilon)

    hx = hits_x[scored].astype(float)
    hxp = hits_xp[scored].astype(float)
    raw = float(np.max(np.abs(np.log(hx / hxp))))
    if alpha is None:
        estimate = raw
    else:
        lo_x, hi_x = clopper_pearson(hx, trials, alpha)
        lo_xp, hi_xp = clopper_pearson(hxp, trials, alpha)
        shrunk = np.maximum(np.log(lo_x / hi_xp), np.log(lo_xp / hi_x))
        estimate = float(max(0.0, shrunk.max()))
    logger.info(
        "ε-audit finished (epsilon_hat={:.4f}, raw={:.4f}, scored_bins={})", estimate, raw, n_scored
    )
    return AuditResult(estimate, raw, n_scored, trials, bins, mechanism.params.epsilon)


def epsilon_audit(
    mechanism: Mechanism,
    X: Dataset,
    X_prime: Dataset,
    trials: int,
    bins: int,
    rng: np.random.Generator,
    *,
    alpha: float | None = 0.05,
    min_hits: int = 1000,
    mechanism_prime: Mechanism | None = None,
) -> float:
    """
    Empirical ε̂: the largest per-bin log-likelihood ratio between outputs on X and X′.

    Only bins with at least `min_hits` hits on both sides are scored. With `alpha` set, each
    ratio is shrunk to the nearest ends of the bins' Clopper-Pearson intervals.
    """
    return run_audit(
        mechanism,
        X,
        X_prime,
        trials,
        bins,
        rng,
        alpha=alpha,
        min_hits=min_hits,
        mechanism_prime=mechanism_prime,
    ).epsilon_hat
