from __future__ import annotations

import attrs
from loguru import logger

from hintweaver.errors import BudgetExhaustedError, ParameterError
from hintweaver.models.privacy import AmplifiedBudget, LedgerEntry

_TOLERANCE = 1e-12


@attrs.define
class BudgetLedger:
    """
    Single global ε budget under sequential composition.

    Every charge is recorded; a charge that would push `spent` past `global_cap` is refused and
    leaves the ledger untouched.
    """

    global_cap: float = attrs.field(converter=float)
    spent: float = 0.0
    delta_spent: float = 0.0
    entries: list[LedgerEntry] = attrs.field(factory=list)

    @global_cap.validator
    def _check_cap(self, attribute: attrs.Attribute, value: float) -> None:
        if not value > 0:
            raise ParameterError(f"global_cap must be positive, got {value!r}")

    @property
    def remaining(self) -> float:
        return max(0.0, self.global_cap - self.spent)

    def can_afford(self, epsilon: float) -> bool:
        return self.spent + epsilon <= self.global_cap + _TOLERANCE

    def charge(self, round: int, label: str, epsilon: float, delta: float = 0.0) -> LedgerEntry:
        if epsilon < 0 or delta < 0:
            raise ParameterError(f"cannot charge negative budget (ε={epsilon}, δ={delta})")
        if not self.can_afford(epsilon):
            logger.warning(
                "refused budget charge (label={}, epsilon={:.6g}, remaining={:.6g})",
                label,
                epsilon,
                self.remaining,
            )
            raise BudgetExhaustedError(label, epsilon, self.remaining)
        entry = LedgerEntry(round=round, label=label, epsilon=epsilon, delta=delta)
        self.entries.append(entry)
        # the tolerance only absorbs float rounding; spent never passes the cap
        self.spent = min(self.global_cap, self.spent + epsilon)
        self.delta_spent += delta
        logger.debug(
            "charged budget (label={}, epsilon={:.6g}, spent={:.6g})", label, epsilon, self.spent
        )
        return entry

    def charge_amplified(self, round: int, label: str, budget: AmplifiedBudget) -> LedgerEntry:
        return self.charge(round, label, budget.epsilon_prime, budget.delta_prime)

    def trace(self) -> list[dict[str, float | int | str]]:
        return [attrs.asdict(e) for e in self.entries]

    def spent_in_round(self, round: int) -> float:
        return sum(e.epsilon for e in self.entries if e.round == round)
