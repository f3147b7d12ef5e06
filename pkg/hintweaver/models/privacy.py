from __future__ import annotations

import enum
import math
from collections.abc import Callable, Iterator

import attrs

from hintweaver.errors import DataError, ParameterError


def _positive(instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{attribute.name} must be a positive finite number, got {value!r}")


def _unit_interval_open_top(instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not 0 <= value < 1:
        raise ParameterError(f"{attribute.name} must lie in [0, 1), got {value!r}")


def _unit_interval(instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not 0 <= value <= 1:
        raise ParameterError(f"{attribute.name} must lie in [0, 1], got {value!r}")


class NoiseKind(str, enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"


class QueryKind(str, enum.Enum):
    COUNT = "count"
    SUM = "sum"


@attrs.define(frozen=True)
class PrivacyParams:
    """(ε, δ, Δ) triple; Δ is the l1 sensitivity for Laplace, l2 for Gaussian."""

    epsilon: float = attrs.field(converter=float, validator=_positive)
    delta: float = attrs.field(default=0.0, converter=float, validator=_unit_interval_open_top)
    sensitivity: float = attrs.field(default=1.0, converter=float, validator=_positive)

    @property
    def is_pure(self) -> bool:
        return self.delta == 0

    def with_sensitivity(self, sensitivity: float) -> PrivacyParams:
        return attrs.evolve(self, sensitivity=sensitivity)

    def split(self, parts: int) -> PrivacyParams:
        """Even share of ε and δ for `parts` sequentially composed releases."""
        return attrs.evolve(self, epsilon=self.epsilon / parts, delta=self.delta / parts)


@attrs.define(frozen=True)
class NoiseParams:
    kind: NoiseKind = attrs.field(converter=NoiseKind)
    scale: float = attrs.field(converter=float, validator=_positive)
    location: float = attrs.field(default=0.0, converter=float)

    @location.validator
    def _check_location(self, attribute: attrs.Attribute, value: float) -> None:
        if value != 0:
            raise ParameterError(f"noise location must be 0, got {value!r}")

    @property
    def variance(self) -> float:
        if self.kind is NoiseKind.LAPLACE:
            return 2 * self.scale**2
        return self.scale**2


@attrs.define(frozen=True)
class ContributionRecord:
    txid: str
    value: float = attrs.field(converter=float)
    opted_in: bool = True
    labels: frozenset[str] = attrs.field(factory=frozenset, converter=frozenset)

    @value.validator
    def _check_value(self, attribute: attrs.Attribute, value: float) -> None:
        if not math.isfinite(value) or value < 0:
            raise DataError(f"contribution {self.txid!r} must be finite and >= 0, got {value!r}")


RecordPredicate = Callable[[ContributionRecord], bool]


def _unique_ids(instance: Dataset, attribute: attrs.Attribute, value: tuple) -> None:
    seen: set[str] = set()
    for record in value:
        if record.txid in seen:
            raise DataError(f"duplicate transaction id in dataset: {record.txid!r}")
        seen.add(record.txid)


@attrs.define(frozen=True)
class Dataset:
    entries: tuple[ContributionRecord, ...] = attrs.field(
        factory=tuple, converter=tuple, validator=_unique_ids
    )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ContributionRecord]:
        return iter(self.entries)

    @property
    def txids(self) -> tuple[str, ...]:
        return tuple(r.txid for r in self.entries)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(r.value for r in self.entries)

    def filter(self, predicate: RecordPredicate) -> Dataset:
        return Dataset(entries=tuple(r for r in self.entries if predicate(r)))

    def with_entry(self, record: ContributionRecord) -> Dataset:
        return Dataset(entries=(*self.entries, record))

    def without(self, txid: str) -> Dataset:
        if txid not in self.txids:
            raise DataError(f"no entry {txid!r} to remove")
        return Dataset(entries=tuple(r for r in self.entries if r.txid != txid))

    def is_neighbor_of(self, other: Dataset) -> bool:
        """True when one dataset is the other plus exactly one additional entry."""
        big, small = (self, other) if len(self) > len(other) else (other, self)
        if len(big) != len(small) + 1:
            return False
        return set(small.entries) <= set(big.entries)

    @classmethod
    def from_values(cls, values: list[float], *, prefix: str = "tx") -> Dataset:
        return cls(
            entries=tuple(
                ContributionRecord(txid=f"{prefix}{idx}", value=v) for idx, v in enumerate(values)
            )
        )


@attrs.define(frozen=True)
class AmplifiedBudget:
    base: PrivacyParams
    q: float = attrs.field(converter=float, validator=_unit_interval)
    epsilon_prime: float = attrs.field(converter=float)
    delta_prime: float = attrs.field(converter=float)

    @property
    def is_amplified(self) -> bool:
        return self.q < 1


@attrs.define(frozen=True)
class LedgerEntry:
    round: int
    label: str
    epsilon: float
    delta: float = 0.0
