from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import orjson
import yaml
from pydantic import BaseModel, Extra, ValidationError, root_validator, validator
from rich.console import Console, ConsoleOptions, RenderResult
from rich.table import Table

from hintweaver.errors import ParameterError, ScenarioError
from hintweaver.models.hints import AggSpec, CountCondition, HintField, RateLimitScope, TxFilter
from hintweaver.models.market import Pair, PoolState
from hintweaver.models.privacy import QueryKind
from hintweaver.searchers.priors import AmountPrior, PriorFamily
from hintweaver.searchers.programs import GasModel
from hintweaver.searchers.strategies import CutMode, StrategyKind


class StrictModel(BaseModel):
    class Config:
        extra = Extra.forbid


def _pair_key(value: str | None) -> str | None:
    if value is None:
        return None
    try:
        return Pair.parse(value).key
    except ParameterError as e:
        raise ValueError(str(e)) from e


class PriorConfig(StrictModel):
    """Log-normal (`mu`, `sigma` of the log amount, in whole tokens) or an explicit histogram."""

    family: PriorFamily = PriorFamily.LOGNORMAL
    mu: float = math.log(1_000)
    sigma: float = 1.0
    edges: tuple[float, ...] = ()
    masses: tuple[float, ...] = ()

    @validator("sigma")
    def _check_sigma(cls, v: float) -> float:
        if v < 0:
            raise ValueError("sigma must be non-negative")
        return v

    @root_validator(skip_on_failure=True)
    def _check_histogram(cls, values: dict[str, Any]) -> dict[str, Any]:
        if values["family"] is PriorFamily.HISTOGRAM:
            if len(values["edges"]) != len(values["masses"]) + 1 or not values["masses"]:
                raise ValueError("histogram prior needs len(edges) == len(masses) + 1 >= 2")
        return values

    def build(self, scale: float = 1.0, drift: float = 0.0) -> AmountPrior:
        """The prior in base units, its log location shifted by `drift`."""
        if self.family is PriorFamily.LOGNORMAL:
            return AmountPrior.lognormal(mu=self.mu + drift + math.log(scale), sigma=self.sigma)
        factor = scale * math.exp(drift)
        try:
            return AmountPrior(
                family=PriorFamily.HISTOGRAM,
                edges=tuple(e * factor for e in self.edges),
                masses=self.masses,
            )
        except ParameterError as e:
            raise ScenarioError(str(e)) from e


class PoolConfig(StrictModel):
    protocol: str
    pair: str
    reserves: tuple[int, int]
    fee_ppm: int = 3000

    _pair = validator("pair", allow_reuse=True)(_pair_key)

    @validator("reserves")
    def _check_reserves(cls, v: tuple[int, int]) -> tuple[int, int]:
        if min(v) <= 0:
            raise ValueError("reserves must be positive")
        return v

    @validator("fee_ppm")
    def _check_fee(cls, v: int) -> int:
        if not 0 <= v < 1_000_000:
            raise ValueError("fee_ppm must lie in [0, 1000000)")
        return v

    def build(self, scale: int = 1) -> PoolState:
        l1, l2 = self.reserves
        return PoolState(
            protocol=self.protocol,
            pair=Pair.parse(self.pair),
            l1=l1 * scale,
            l2=l2 * scale,
            fee_ppm=self.fee_ppm,
        )


class HintMixEntry(StrictModel):
    weight: float = 1.0
    plain_fields: tuple[HintField, ...] = (HintField.PAIR, HintField.PROTOCOL)
    specs: tuple[str, ...] = ()

    @validator("weight")
    def _check_weight(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("weight must be positive")
        return v


class PopulationConfig(StrictModel):
    users_per_round: int = 20
    amount_prior: PriorConfig = PriorConfig()
    regime_drift: float = 0.0
    sell_token2_share: float = 0.5
    hint_mix: tuple[HintMixEntry, ...] = (HintMixEntry(),)

    @validator("users_per_round")
    def _check_users(cls, v: int) -> int:
        if v < 0:
            raise ValueError("users_per_round must be non-negative")
        return v

    @validator("regime_drift")
    def _check_drift(cls, v: float) -> float:
        if v < 0:
            raise ValueError("regime_drift must be non-negative")
        return v

    @validator("sell_token2_share")
    def _check_share(cls, v: float) -> float:
        if not 0 <= v <= 1:
            raise ValueError("sell_token2_share must lie in [0, 1]")
        return v

    @validator("hint_mix")
    def _check_mix(cls, v: tuple[HintMixEntry, ...]) -> tuple[HintMixEntry, ...]:
        if not v:
            raise ValueError("hint_mix needs at least one entry")
        return v

    def marginal_prior(self, scale: float = 1.0) -> AmountPrior:
        """The amount prior with the round-to-round drift folded into its spread."""
        prior = self.amount_prior
        if prior.family is PriorFamily.LOGNORMAL:
            sigma = math.hypot(prior.sigma, self.regime_drift)
            return AmountPrior.lognormal(mu=prior.mu + math.log(scale), sigma=sigma)
        return prior.build(scale)


class SearcherConfig(StrictModel):
    id: str
    strategy: StrategyKind
    rebate_percent: int = 50
    k: int | None = None
    cut_mode: CutMode = CutMode.QUANTILES
    prior: PriorConfig | None = None
    learn_prior: bool = False
    prior_family: PriorFamily = PriorFamily.HISTOGRAM
    exact: bool = True

    @validator("rebate_percent")
    def _check_rebate(cls, v: int) -> int:
        if not 0 <= v <= 100:
            raise ValueError("rebate_percent must lie in [0, 100]")
        return v

    @validator("k")
    def _check_k(cls, v: int | None) -> int | None:
        if v is not None and v < 0:
            raise ValueError("k must be non-negative")
        return v


class AggSpecConfig(StrictModel):
    spec_id: str
    query: QueryKind
    pair: str | None = None
    protocol: str | None = None
    attribute: HintField = HintField.AMOUNT
    min_opted_in: int = 10
    min_opted_out: int = 10
    epsilon_cond: float = 1.0
    epsilon_query: float = 1.0
    clamp_cap: float | None = None

    _pair = validator("pair", allow_reuse=True)(_pair_key)

    @validator("min_opted_in", "min_opted_out")
    def _check_threshold(cls, v: int) -> int:
        if v < 1:
            raise ValueError("thresholds must be at least 1")
        return v

    @validator("epsilon_cond", "epsilon_query")
    def _check_epsilon(cls, v: float) -> float:
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("epsilon must be positive and finite")
        return v

    @root_validator(skip_on_failure=True)
    def _check_cap(cls, values: dict[str, Any]) -> dict[str, Any]:
        cap = values["clamp_cap"]
        if values["query"] is QueryKind.SUM and (cap is None or not cap > 0):
            raise ValueError("sum specs need a positive clamp_cap")
        return values

    def build(self, scale: float = 1.0) -> AggSpec:
        return AggSpec(
            spec_id=self.spec_id,
            query=self.query,
            filter=TxFilter(pair=self.pair, protocol=self.protocol),
            attribute=self.attribute,
            condition=CountCondition(self.min_opted_in, self.min_opted_out),
            epsilon_cond=self.epsilon_cond,
            epsilon_query=self.epsilon_query,
            clamp_cap=None if self.clamp_cap is None else self.clamp_cap * scale,
        )


class GasConfig(StrictModel):
    plain: int = 100
    probe: int = 150
    price: int = 1

    @root_validator(skip_on_failure=True)
    def _check_gas(cls, values: dict[str, Any]) -> dict[str, Any]:
        if values["plain"] < 0 or values["probe"] <= 0 or values["price"] < 0:
            raise ValueError("gas constants must be non-negative, with a positive probe surcharge")
        return values

    def model(self) -> GasModel:
        return GasModel(plain=self.plain, probe=self.probe)


class AttackConfig(StrictModel):
    spec_id: str
    sybil_count: int = 100
    sybil_value: float | None = None
    decoy_count: int = 100
    victim_prior: PriorConfig | None = None
    background_users: int = 50

    @validator("sybil_count")
    def _check_sybils(cls, v: int) -> int:
        if v < 1:
            raise ValueError("at least one sybil is needed")
        return v

    @validator("decoy_count", "background_users")
    def _check_count(cls, v: int) -> int:
        if v < 0:
            raise ValueError("counts must be non-negative")
        return v


class ScenarioConfig(StrictModel):
    name: str = "scenario"
    seed: int
    rounds: int = 10
    token_scale: int = 1
    pools: tuple[PoolConfig, ...]
    population: PopulationConfig = PopulationConfig()
    searchers: tuple[SearcherConfig, ...] = ()
    agg_specs: tuple[AggSpecConfig, ...] = ()
    subsample_rate: float = 1.0
    global_epsilon_cap: float = 100.0
    noise_enabled: bool = True
    gas: GasConfig = GasConfig()
    rate_limit: int = 16
    rate_limit_scope: RateLimitScope = RateLimitScope.PER_ROUND
    max_wait_rounds: int = 0
    attack: AttackConfig | None = None

    @validator("rounds", "token_scale")
    def _check_positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @validator("rate_limit", "max_wait_rounds")
    def _check_non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be non-negative")
        return v

    @validator("subsample_rate")
    def _check_rate(cls, v: float) -> float:
        if not 0 <= v <= 1:
            raise ValueError(f"subsample_rate must lie in [0, 1], got {v}")
        return v

    @validator("global_epsilon_cap")
    def _check_cap(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("global_epsilon_cap must be positive")
        return v

    @validator("pools")
    def _check_pools(cls, v: tuple[PoolConfig, ...]) -> tuple[PoolConfig, ...]:
        if not v:
            raise ValueError("at least one pool is required")
        keys = [(p.protocol, p.pair) for p in v]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate pool (protocol, pair)")
        return v

    @validator("searchers")
    def _check_searchers(cls, v: tuple[SearcherConfig, ...]) -> tuple[SearcherConfig, ...]:
        ids = [s.id for s in v]
        if len(set(ids)) != len(ids):
            raise ValueError("searcher ids must be unique")
        return v

    @root_validator(skip_on_failure=True)
    def _check_references(cls, values: dict[str, Any]) -> dict[str, Any]:
        pools = values["pools"]
        pairs = {p.pair for p in pools}
        protocols = {p.protocol for p in pools}
        specs = {s.spec_id: s for s in values["agg_specs"]}
        if len(specs) != len(values["agg_specs"]):
            raise ValueError("agg_specs: spec ids must be unique")
        for spec in specs.values():
            if spec.pair is not None and spec.pair not in pairs:
                raise ValueError(f"agg_specs: {spec.spec_id!r} needs a pool for {spec.pair}")
            if spec.protocol is not None and spec.protocol not in protocols:
                raise ValueError(f"agg_specs: unknown protocol {spec.protocol!r}")
        for entry in values["population"].hint_mix:
            for spec_id in entry.specs:
                if spec_id not in specs:
                    raise ValueError(f"population.hint_mix: unknown spec {spec_id!r}")
                if specs[spec_id].attribute in entry.plain_fields:
                    raise ValueError(
                        f"population.hint_mix: spec {spec_id!r} aggregates a disclosed field"
                    )
        attack = values["attack"]
        if attack is not None:
            spec = specs.get(attack.spec_id)
            if spec is None:
                raise ValueError(f"attack: unknown spec {attack.spec_id!r}")
            if spec.query is not QueryKind.SUM:
                raise ValueError(f"attack: spec {attack.spec_id!r} must be a sum")
        return values

    def spec(self, spec_id: str) -> AggSpecConfig:
        return next(s for s in self.agg_specs if s.spec_id == spec_id)

    def echo(self) -> str:
        """Resolved config as YAML that loads back into an equal config."""
        return yaml.safe_dump(orjson.loads(self.json()), sort_keys=True)

    def __rich_console__(self, console: Console, options: ConsoleOptions) -> RenderResult:
        yield f"[b]{self.__class__.__name__}[/b] {self.name}"
        table = Table("Field", "Value", expand=True, highlight=True)
        for field, value in self.dict(exclude={"pools", "searchers", "agg_specs"}).items():
            table.add_row(field, str(value))
        table.add_row("pools", ", ".join(f"{p.protocol}:{p.pair}" for p in self.pools))
        table.add_row("searchers", ", ".join(f"{s.id}({s.strategy.value})" for s in self.searchers))
        table.add_row("agg_specs", ", ".join(s.spec_id for s in self.agg_specs))
        yield table


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc'])}: {item['msg']}" for item in error.errors()
    )


def parse_scenario(data: Any, source: str = "<scenario>") -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: expected a mapping at the top level")
    try:
        return ScenarioConfig.parse_obj(data)
    except ValidationError as e:
        raise ScenarioError(f"{source}: {_describe(e)}") from e


def load_scenario(path: Path | str) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ScenarioError(f"{path}: invalid YAML: {e}") from e
    return parse_scenario(data, str(path))
