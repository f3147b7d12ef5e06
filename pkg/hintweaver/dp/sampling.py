from __future__ import annotations

import math

import numpy as np
from loguru import logger

from hintweaver.errors import ParameterError
from hintweaver.models.privacy import AmplifiedBudget, Dataset, PrivacyParams
from hintweaver.utils import round_half_up


def _check_rate(q: float) -> float:
    q = float(q)
    if not 0 <= q <= 1:
        raise ParameterError(f"subsample rate must lie in [0, 1], got {q!r}")
    return q


def sample_size(n: int, q: float) -> int:
    return min(n, round_half_up(_check_rate(q) * n))


def subsample_indices(n: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of a uniform fixed-size subset of range(n)."""
    m = sample_size(n, q)
    if m == n:
        return np.arange(n)
    if m == 0:
        return np.arange(0)
    return np.sort(rng.choice(n, size=m, replace=False))


def subsample(dataset: Dataset, q: float, rng: np.random.Generator) -> Dataset:
    """
    Uniform subset of round(q·n) entries drawn without replacement.

    Selected entries keep their original order; `dataset` is not modified.
    """
    idx = subsample_indices(len(dataset), q, rng)
    sample = Dataset(entries=tuple(dataset.entries[i] for i in idx))
    logger.trace("subsampled dataset (n={}, q={}, m={})", len(dataset), q, len(sample))
    return sample


def amplify_by_subsampling(base: PrivacyParams, q: float) -> AmplifiedBudget:
    """Amplified (ε′, δ′) = (ln(1 + q(e^ε − 1)), qδ) of a mechanism run on a q-subsample."""
    q = _check_rate(q)
    if q == 1:
        eps_prime = base.epsilon
    else:
        eps_prime = min(base.epsilon, math.log1p(q * math.expm1(base.epsilon)))
    return AmplifiedBudget(base=base, q=q, epsilon_prime=eps_prime, delta_prime=q * base.delta)
