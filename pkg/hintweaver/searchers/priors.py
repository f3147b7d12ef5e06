from __future__ import annotations

import enum
import math
from collections.abc import Sequence

import attrs
import numpy as np
from loguru import logger
from scipy import stats

from hintweaver.errors import ParameterError

MAX_HISTOGRAM_BINS = 512
MIN_AMOUNT = 1.0


class PriorFamily(str, enum.Enum):
    HISTOGRAM = "histogram"
    LOGNORMAL = "lognormal"


def _tuple_of_floats(values: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@attrs.define(frozen=True)
class AmountPrior:
    """
    Searcher belief over a victim's trade amount.

    Either a histogram (bucket `edges` with one mass per bucket, uniform within a bucket; a
    zero-width bucket is a point mass) or a log-normal with location `mu` and scale `sigma`
    (sigma 0 is a point mass at exp(mu)).
    """

    family: PriorFamily = attrs.field(converter=PriorFamily)
    edges: tuple[float, ...] = attrs.field(default=(), converter=_tuple_of_floats)
    masses: tuple[float, ...] = attrs.field(default=(), converter=_tuple_of_floats)
    mu: float = 0.0
    sigma: float = 1.0

    def __attrs_post_init__(self) -> None:
        if self.family is PriorFamily.LOGNORMAL:
            if self.sigma < 0 or not math.isfinite(self.mu):
                raise ParameterError(f"invalid log-normal prior (mu={self.mu}, sigma={self.sigma})")
            return
        if len(self.edges) != len(self.masses) + 1 or not self.masses:
            raise ParameterError("histogram prior needs len(edges) == len(masses) + 1 >= 2")
        if self.edges[0] <= 0:
            raise ParameterError(f"histogram support must be positive, got {self.edges[0]}")
        if any(hi < lo for lo, hi in zip(self.edges, self.edges[1:])):
            raise ParameterError("histogram edges must be non-decreasing")
        if any(m < 0 for m in self.masses) or abs(sum(self.masses) - 1) > 1e-9:
            raise ParameterError(f"histogram masses must be non-negative with sum 1: {self.masses}")

    @classmethod
    def point(cls, value: float) -> AmountPrior:
        value = max(float(value), MIN_AMOUNT)
        return cls(family=PriorFamily.HISTOGRAM, edges=(value, value), masses=(1.0,))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> AmountPrior:
        return cls(family=PriorFamily.LOGNORMAL, mu=mu, sigma=sigma)

    @property
    def is_point(self) -> bool:
        if self.family is PriorFamily.LOGNORMAL:
            return self.sigma == 0
        return self.edges[0] == self.edges[-1]

    @property
    def mean(self) -> float:
        if self.family is PriorFamily.LOGNORMAL:
            return math.exp(self.mu + self.sigma**2 / 2)
        edges = np.asarray(self.edges)
        mids = (edges[:-1] + edges[1:]) / 2
        return float(np.dot(mids, self.masses))

    def quantile(self, p: float | np.ndarray) -> np.ndarray:
        p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
        if self.family is PriorFamily.LOGNORMAL:
            if self.sigma == 0:
                return np.full(p.shape, math.exp(self.mu))
            return stats.lognorm(s=self.sigma, scale=math.exp(self.mu)).ppf(p)
        cdf = np.concatenate(([0.0], np.cumsum(self.masses)))
        cdf[-1] = 1.0
        # interpolate inside the bucket holding p; ties resolve to the first bucket with mass
        idx = np.clip(np.searchsorted(cdf, p, side="left") - 1, 0, len(self.masses) - 1)
        masses = np.asarray(self.masses)[idx]
        lo = np.asarray(self.edges)[idx]
        hi = np.asarray(self.edges)[idx + 1]
        frac = np.divide(p - cdf[idx], masses, out=np.zeros_like(p), where=masses > 0)
        return lo + np.clip(frac, 0.0, 1.0) * (hi - lo)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family is PriorFamily.LOGNORMAL:
            return rng.lognormal(self.mu, self.sigma, size)
        return self.quantile(rng.random(size))

    def shifted(self, center: float) -> AmountPrior:
        """The same shape relocated so its mean is `center`."""
        center = max(float(center), MIN_AMOUNT)
        if self.family is PriorFamily.LOGNORMAL:
            return attrs.evolve(self, mu=math.log(center) - self.sigma**2 / 2)
        offset = center - self.mean
        edges = np.maximum(np.asarray(self.edges) + offset, MIN_AMOUNT)
        return attrs.evolve(self, edges=tuple(edges))


DEFAULT_PRIOR = AmountPrior.lognormal(mu=math.log(1_000_000), sigma=1.0)


def estimate_prior(
    history: Sequence[float],
    family: PriorFamily = PriorFamily.HISTOGRAM,
    default: AmountPrior | None = None,
) -> AmountPrior:
    """
    Fit a prior to observed settled amounts.

    Histograms use Freedman–Diaconis bucketing; log-normals are moment-matched. A constant history
    gives a point mass and an empty one the configured default.
    """
    if not len(history):
        return default or DEFAULT_PRIOR
    amounts = np.asarray(history, dtype=float)
    if np.any(amounts <= 0) or not np.all(np.isfinite(amounts)):
        raise ParameterError("amount history must be positive and finite")
    if np.ptp(amounts) == 0:
        return AmountPrior.point(float(amounts[0]))

    if PriorFamily(family) is PriorFamily.LOGNORMAL:
        mean = float(amounts.mean())
        var = float(amounts.var())
        sigma2 = math.log1p(var / mean**2)
        return AmountPrior.lognormal(mu=math.log(mean) - sigma2 / 2, sigma=math.sqrt(sigma2))

    edges = np.histogram_bin_edges(amounts, bins="fd")
    if len(edges) - 1 > MAX_HISTOGRAM_BINS:
        logger.debug("capping histogram prior at {} bins", MAX_HISTOGRAM_BINS)
        edges = np.histogram_bin_edges(amounts, bins=MAX_HISTOGRAM_BINS)
    counts, edges = np.histogram(amounts, bins=edges)
    masses = counts / counts.sum()
    return AmountPrior(family=PriorFamily.HISTOGRAM, edges=tuple(edges), masses=tuple(masses))
