from __future__ import annotations

import math
from collections.abc import Callable

import attrs
import numpy as np
from loguru import logger

from hintweaver.dp.noise import NoiseSource, noise_for, sample_noise
from hintweaver.dp.sampling import amplify_by_subsampling, sample_size, subsample
from hintweaver.errors import DataError, ParameterError
from hintweaver.models.privacy import (
    AmplifiedBudget,
    ContributionRecord,
    Dataset,
    NoiseKind,
    PrivacyParams,
    QueryKind,
    RecordPredicate,
)

ValueSelector = Callable[[ContributionRecord], float]


def _select_value(record: ContributionRecord) -> float:
    return record.value


def dp_count(
    dataset: Dataset,
    predicate: RecordPredicate,
    params: PrivacyParams,
    rng: NoiseSource,
    kind: NoiseKind = NoiseKind.LAPLACE,
) -> float:
    """
    Noisy count of entries satisfying `predicate`.

    Sensitivity is always 1 regardless of what `params` carries. The release is a raw real and
    may be negative or fractional.
    """
    params = params.with_sensitivity(1.0)
    true_count = sum(1 for r in dataset if predicate(r))
    return true_count + sample_noise(noise_for(params, kind), rng)


def clamped_total(dataset: Dataset, selector: ValueSelector, clamp_cap: float) -> float:
    if not clamp_cap > 0:
        raise ParameterError(f"clamp_cap must be positive, got {clamp_cap!r}")
    total = 0.0
    for record in dataset:
        value = selector(record)
        if not math.isfinite(value) or value < 0:
            raise DataError(f"contribution {record.txid!r} is not a non-negative amount: {value!r}")
        total += min(value, clamp_cap)
    return total


def dp_sum(
    dataset: Dataset,
    selector: ValueSelector,
    clamp_cap: float,
    params: PrivacyParams,
    rng: NoiseSource,
    kind: NoiseKind = NoiseKind.LAPLACE,
) -> float:
    """Noisy sum of per-entry clamped values; sensitivity is the clamp cap."""
    total = clamped_total(dataset, selector, clamp_cap)
    params = params.with_sensitivity(clamp_cap)
    return total + sample_noise(noise_for(params, kind), rng)


def derive_mean(noisy_count: float, noisy_sum: float) -> float | None:
    """Post-processed mean of two released values; None when the count is below 1."""
    if noisy_count < 1:
        return None
    return noisy_sum / noisy_count


@attrs.define(frozen=True)
class Mechanism:
    """
    A releasable mechanism: query, privacy parameters, noise family and subsample rate.

    Entries are considered when `label` is None or carried in the entry's labels.
    """

    query: QueryKind = attrs.field(converter=QueryKind)
    params: PrivacyParams
    kind: NoiseKind = attrs.field(default=NoiseKind.LAPLACE, converter=NoiseKind)
    q: float = attrs.field(default=1.0, converter=float)
    clamp_cap: float | None = attrs.field(default=None)
    label: str | None = None

    @q.validator
    def _check_q(self, attribute: attrs.Attribute, value: float) -> None:
        if not 0 <= value <= 1:
            raise ParameterError(f"subsample rate must lie in [0, 1], got {value!r}")

    @clamp_cap.validator
    def _check_cap(self, attribute: attrs.Attribute, value: float | None) -> None:
        if self.query is QueryKind.SUM and (value is None or not value > 0):
            raise ParameterError("sum mechanism requires a positive clamp_cap")

    @property
    def budget(self) -> AmplifiedBudget:
        return amplify_by_subsampling(self.params, self.q)

    def _matches(self, record: ContributionRecord) -> bool:
        return self.label is None or self.label in record.labels

    def _evaluate(self, dataset: Dataset, noise: NoiseSource) -> float:
        if self.query is QueryKind.COUNT:
            return dp_count(dataset, self._matches, self.params, noise, self.kind)
        view = dataset.filter(self._matches)
        assert self.clamp_cap is not None
        return dp_sum(view, _select_value, self.clamp_cap, self.params, noise, self.kind)

    def release(
        self,
        dataset: Dataset,
        noise: NoiseSource,
        sampling: np.random.Generator | None = None,
    ) -> float:
        if self.q < 1:
            if sampling is None:
                raise ParameterError("a sampling stream is required when q < 1")
            dataset = subsample(dataset, self.q, sampling)
        return self._evaluate(dataset, noise)

    def contributions(self, dataset: Dataset) -> np.ndarray:
        """Per-entry contribution to the un-noised query answer."""
        out = np.zeros(len(dataset))
        for idx, record in enumerate(dataset):
            if not self._matches(record):
                continue
            if self.query is QueryKind.COUNT:
                out[idx] = 1.0
            else:
                assert self.clamp_cap is not None
                out[idx] = min(record.value, self.clamp_cap)
        return out

    def release_many(
        self, dataset: Dataset, trials: int, rng: np.random.Generator, chunk: int = 100_000
    ) -> np.ndarray:
        """
        `trials` independent releases on `dataset`, each with a fresh subsample and noise draw.

        Trials run in chunks so memory stays bounded by `chunk · len(dataset)`.
        """
        contrib = self.contributions(dataset)
        n = len(dataset)
        m = sample_size(n, self.q)
        sensitivity = 1.0 if self.query is QueryKind.COUNT else float(self.clamp_cap or 0)
        noise = noise_for(self.params.with_sensitivity(sensitivity), self.kind)
        out = np.empty(trials)
        done = 0
        while done < trials:
            size = min(chunk, trials - done)
            if m == n:
                totals = np.full(size, contrib.sum())
            elif m == 0:
                totals = np.zeros(size)
            else:
                keys = rng.random((size, n))
                picked = np.argpartition(keys, m - 1, axis=1)[:, :m]
                totals = contrib[picked].sum(axis=1)
            out[done : done + size] = totals + sample_noise(noise, rng, size)
            done += size
        logger.debug(
            "ran vectorised releases (query={}, trials={}, n={}, m={})",
            self.query.value,
            trials,
            n,
            m,
        )
        return out


def count_mechanism(
    epsilon: float,
    *,
    delta: float = 0.0,
    kind: NoiseKind = NoiseKind.LAPLACE,
    q: float = 1.0,
    label: str | None = None,
) -> Mechanism:
    return Mechanism(
        query=QueryKind.COUNT,
        params=PrivacyParams(epsilon=epsilon, delta=delta, sensitivity=1.0),
        kind=kind,
        q=q,
        label=label,
    )


def sum_mechanism(
    epsilon: float,
    clamp_cap: float,
    *,
    delta: float = 0.0,
    kind: NoiseKind = NoiseKind.LAPLACE,
    q: float = 1.0,
    label: str | None = None,
) -> Mechanism:
    return Mechanism(
        query=QueryKind.SUM,
        params=PrivacyParams(epsilon=epsilon, delta=delta, sensitivity=clamp_cap),
        kind=kind,
        q=q,
        clamp_cap=clamp_cap,
        label=label,
    )
