from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Collection, Iterator, Mapping

import attrs
import numpy as np
from loguru import logger

from hintweaver.dp.mechanisms import derive_mean
from hintweaver.errors import UnknownVenueError
from hintweaver.market.chain import backrun
from hintweaver.models.hints import (
    AggregateRelease,
    BundleTemplate,
    HintRelease,
    PlainHint,
    TradeHint,
)
from hintweaver.models.market import ChainState, Direction
from hintweaver.models.privacy import QueryKind
from hintweaver.searchers.priors import MIN_AMOUNT, AmountPrior
from hintweaver.searchers.programs import ContractBackrun, GasModel, StaticBackrun
from hintweaver.utils import round_half_up


class StrategyKind(str, enum.Enum):
    CONTRACT = "contract"
    BRUTE_FORCE = "brute_force"
    HINT_ENHANCED = "hint_enhanced"
    HYBRID = "hybrid"


class CutMode(str, enum.Enum):
    QUANTILES = "quantiles"
    SAMPLE = "sample"


@attrs.define(frozen=True)
class SearcherParams:
    searcher_id: str
    rebate_percent: int = 50
    cut_mode: CutMode = attrs.field(default=CutMode.QUANTILES, converter=CutMode)
    gas: GasModel = attrs.field(factory=GasModel)
    exact: bool = True


@attrs.define(frozen=True)
class StrategyReport:
    strategy: str
    searcher_id: str
    round: int
    templates: int = 0
    won: bool = False
    gross: int = 0
    gas: int = 0
    kickback: int = 0

    @property
    def net(self) -> int:
        return self.gross - self.gas - self.kickback


def _hinted(release: HintRelease, targets: Collection[str] | None) -> Iterator[PlainHint]:
    for hint in release.plain_hints:
        if targets is None or hint.txid in targets:
            yield hint


def cut_points(k: int) -> np.ndarray:
    """Mid-bucket probabilities (2i+1)/2k, i.e. k=5 gives the 10th, 30th, ..., 90th percentiles."""
    return (2 * np.arange(k) + 1) / (2 * k)


def candidate_amounts(
    prior: AmountPrior, k: int, mode: CutMode, rng: np.random.Generator
) -> np.ndarray:
    if k <= 0:
        return np.zeros(0)
    if mode is CutMode.SAMPLE:
        values = prior.sample(rng, k)
    else:
        values = prior.quantile(cut_points(k))
    return np.maximum(np.asarray(values, dtype=float), MIN_AMOUNT)


def contract_backrun_strategy(
    release: HintRelease,
    view: ChainState,
    params: SearcherParams,
    *,
    targets: Collection[str] | None = None,
    probe_venues: Mapping[str, tuple[str, ...]] | None = None,
    strategy: str = StrategyKind.CONTRACT.value,
) -> list[BundleTemplate]:
    """
    One contract template per hinted victim whose pair is public.

    A disclosed protocol pins the probe to that venue; otherwise every venue pooling the pair is
    probed (or the ones `probe_venues` names for the pair key), paying the probe surcharge each.
    """
    templates = []
    for hint in _hinted(release, targets):
        trade = hint.first
        if trade.pair is None:
            continue
        pair = trade.pair.canonicalized()
        if trade.protocol is not None:
            venues: tuple[str, ...] = (trade.protocol,)
        elif probe_venues is not None and pair.key in probe_venues:
            venues = probe_venues[pair.key]
        else:
            venues = tuple(view.venues(pair))
        venues = tuple(v for v in venues if view.has_pool(v, pair))
        if not venues:
            logger.debug("{} abstains on {}: no venue to probe", params.searcher_id, hint.txid)
            continue
        templates.append(
            BundleTemplate(
                searcher_id=params.searcher_id,
                txid=hint.txid,
                program=ContractBackrun(pair=pair, probe_venues=venues, exact=params.exact),
                strategy=strategy,
                rebate_percent=params.rebate_percent,
                gas_units=params.gas.contract(len(venues)),
            )
        )
    return templates


def _directions(trade: TradeHint, n: int) -> list[Direction]:
    if trade.direction is not None:
        return [trade.direction] * n
    cycle = (Direction.SELL_TOKEN2, Direction.SELL_TOKEN1)
    return [cycle[i % 2] for i in range(n)]


def _static_templates(
    hint: PlainHint,
    prior: AmountPrior,
    k: int,
    rng: np.random.Generator,
    view: ChainState,
    params: SearcherParams,
    strategy: str,
) -> list[BundleTemplate]:
    trade = hint.first
    if k <= 0 or trade.pair is None or trade.protocol is None:
        return []
    try:
        pool = view.pool(trade.protocol, trade.pair)
    except UnknownVenueError:
        logger.debug("{} abstains on {}: venue unknown", params.searcher_id, hint.txid)
        return []

    if trade.amount is not None:
        amounts = np.asarray([float(trade.amount)])
    else:
        amounts = candidate_amounts(prior, k, params.cut_mode, rng)

    canonical = trade.pair.canonicalized()
    programs: list[StaticBackrun] = []
    for amount, direction in zip(amounts, _directions(trade, len(amounts))):
        plan = backrun(
            canonical.oriented(direction),
            trade.protocol,
            max(1, round_half_up(amount)),
            pool.l1,
            pool.l2,
            view,
            exact=params.exact,
        )
        if plan.route is None:
            continue
        buy, sell = plan.route
        program = StaticBackrun(
            pair=canonical, buy_venue=buy, sell_venue=sell, amount_in=plan.amount_in
        )
        if program not in programs:
            programs.append(program)

    return [
        BundleTemplate(
            searcher_id=params.searcher_id,
            txid=hint.txid,
            program=program,
            strategy=strategy,
            rebate_percent=params.rebate_percent,
            gas_units=params.gas.plain,
        )
        for program in programs[:k]
    ]


def brute_force_strategy(
    release: HintRelease,
    prior: AmountPrior,
    k: int,
    rng: np.random.Generator,
    view: ChainState,
    params: SearcherParams,
    *,
    targets: Collection[str] | None = None,
    strategy: str = StrategyKind.BRUTE_FORCE.value,
) -> list[BundleTemplate]:
    """
    Up to `k` static backruns per victim, each precomputed for one candidate amount drawn from
    `prior` (quantile cuts or samples, per `params.cut_mode`).
    """
    templates: list[BundleTemplate] = []
    for hint in _hinted(release, targets):
        templates.extend(_static_templates(hint, prior, k, rng, view, params, strategy))
    return templates


def _covers(agg: AggregateRelease, trade: TradeHint) -> bool:
    """Whether the aggregate's filter provably selects the hinted trade."""
    if agg.filter.pair is not None:
        if trade.pair is None or trade.pair.key != agg.filter.pair:
            return False
    if agg.filter.protocol is not None:
        if trade.protocol is None or trade.protocol != agg.filter.protocol:
            return False
    return True


def _companion_count(
    release: HintRelease, hint: PlainHint, sum_release: AggregateRelease
) -> AggregateRelease | None:
    population = {h.txid for h in release.opted_in(sum_release.spec_id)}
    for agg in release.aggregates:
        if (
            agg.query is QueryKind.COUNT
            and agg.satisfied
            and agg.filter == sum_release.filter
            and agg.spec_id in hint.opted_specs
            and {h.txid for h in release.opted_in(agg.spec_id)} == population
        ):
            return agg
    return None


def posterior_for(release: HintRelease, hint: PlainHint, prior: AmountPrior) -> AmountPrior | None:
    """
    Relocate `prior` onto what the victim's satisfied sum aggregate says about its amount.

    The centre is the hinted mean when a count over the same opted-in population was released too,
    otherwise the rescaled sum minus the prior's expectation for the other opted-in transactions.
    A victim that is the only opted-in transaction gets a point mass. None when no satisfied sum
    aggregate covers the victim.
    """
    for spec_id in hint.opted_specs:
        agg = release.aggregate(spec_id)
        if agg is None or not agg.satisfied or agg.query is not QueryKind.SUM:
            continue
        if not _covers(agg, hint.first):
            continue
        assert agg.value is not None
        n_opted = len(release.opted_in(spec_id))

        centre = None
        count = _companion_count(release, hint, agg)
        if count is not None and count.value is not None:
            centre = derive_mean(count.value, agg.value)
        if centre is None:
            n = len(release.plain_hints)
            q_eff = round_half_up(release.q * n) / n if n else release.q
            if q_eff <= 0:
                continue
            centre = agg.value / q_eff - (n_opted - 1) * prior.mean
        if agg.clamp_cap is not None:
            centre = min(centre, agg.clamp_cap)
        centre = max(centre, MIN_AMOUNT)

        logger.trace("posterior for {} centred at {:.1f} via {}", hint.txid, centre, spec_id)
        if n_opted <= 1:
            return AmountPrior.point(centre)
        return prior.shifted(centre)
    return None


def hint_enhanced_strategy(
    release: HintRelease,
    prior: AmountPrior,
    k: int,
    rng: np.random.Generator,
    view: ChainState,
    params: SearcherParams,
    *,
    targets: Collection[str] | None = None,
    strategy: str = StrategyKind.HINT_ENHANCED.value,
) -> list[BundleTemplate]:
    """Brute force on a posterior built from the release's aggregates, per victim."""
    templates: list[BundleTemplate] = []
    for hint in _hinted(release, targets):
        posterior = posterior_for(release, hint, prior) or prior
        templates.extend(_static_templates(hint, posterior, k, rng, view, params, strategy))
    return templates


def venue_frequencies(view: ChainState) -> dict[str, Counter[str]]:
    """How often each venue settled a trade, per canonical pair key."""
    counts: dict[str, Counter[str]] = {}
    for applied in view.history:
        counts.setdefault(applied.trade.pair.key, Counter())[applied.trade.protocol] += 1
    return counts


def hybrid_strategy(
    release: HintRelease,
    view: ChainState,
    params: SearcherParams,
    *,
    targets: Collection[str] | None = None,
) -> list[BundleTemplate]:
    """
    Contract backrun that probes only the venue the pair historically trades on most when the
    protocol is withheld, trading some missed victims for a single probe's gas.
    """
    probes = {}
    for key, counter in venue_frequencies(view).items():
        # ties go to the alphabetically first venue
        ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
        probes[key] = (ranked[0][0],)
    return contract_backrun_strategy(
        release,
        view,
        params,
        targets=targets,
        probe_venues=probes,
        strategy=StrategyKind.HYBRID.value,
    )

