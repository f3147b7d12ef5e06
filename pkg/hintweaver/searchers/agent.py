from __future__ import annotations

from collections.abc import Collection, Iterable

import attrs
import numpy as np
from loguru import logger

from hintweaver.models.hints import BundleTemplate, HintRelease
from hintweaver.models.market import ChainState
from hintweaver.searchers.priors import DEFAULT_PRIOR, AmountPrior, PriorFamily, estimate_prior
from hintweaver.searchers.strategies import (
    SearcherParams,
    StrategyKind,
    brute_force_strategy,
    contract_backrun_strategy,
    hint_enhanced_strategy,
    hybrid_strategy,
)


@attrs.define(slots=False)
class Searcher:
    """
    A searcher running one strategy with its own random stream.

    With `learn_prior` set, the prior is refit from every settled amount the searcher observes.
    """

    params: SearcherParams
    kind: StrategyKind = attrs.field(converter=StrategyKind)
    rng: np.random.Generator = attrs.field(factory=np.random.default_rng)
    k: int = 16
    prior: AmountPrior = DEFAULT_PRIOR
    prior_family: PriorFamily = attrs.field(default=PriorFamily.HISTOGRAM, converter=PriorFamily)
    learn_prior: bool = False
    history: list[float] = attrs.field(factory=list)

    @property
    def searcher_id(self) -> str:
        return self.params.searcher_id

    def propose(
        self,
        release: HintRelease,
        view: ChainState,
        *,
        targets: Collection[str] | None = None,
        k: int | None = None,
    ) -> list[BundleTemplate]:
        k = self.k if k is None else k
        match self.kind:
            case StrategyKind.CONTRACT:
                templates = contract_backrun_strategy(release, view, self.params, targets=targets)
            case StrategyKind.HYBRID:
                templates = hybrid_strategy(release, view, self.params, targets=targets)
            case StrategyKind.BRUTE_FORCE:
                templates = brute_force_strategy(
                    release, self.prior, k, self.rng, view, self.params, targets=targets
                )
            case StrategyKind.HINT_ENHANCED:
                templates = hint_enhanced_strategy(
                    release, self.prior, k, self.rng, view, self.params, targets=targets
                )
        logger.trace("{} proposed {} templates", self.searcher_id, len(templates))
        return templates

    def observe(self, amounts: Iterable[float]) -> None:
        self.history.extend(float(a) for a in amounts)
        if self.learn_prior and self.history:
            self.prior = estimate_prior(self.history, self.prior_family, default=self.prior)
