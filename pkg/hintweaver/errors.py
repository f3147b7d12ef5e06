from __future__ import annotations


class HintweaverError(Exception):
    """Base error for the package."""


class ParameterError(HintweaverError, ValueError):
    """Invalid privacy, noise or market parameter."""


class DataError(HintweaverError, ValueError):
    """Contribution data violates a dataset invariant."""


class BudgetExhaustedError(HintweaverError):
    def __init__(self, label: str, requested: float, remaining: float) -> None:
        super().__init__(
            f"privacy budget exhausted for {label!r}: requested ε={requested:.6g}, "
            f"remaining ε={remaining:.6g}"
        )
        self.label = label
        self.requested = requested
        self.remaining = remaining


class AuditError(HintweaverError):
    """The ε-audit could not be run as configured."""


class MarketError(HintweaverError):
    """Base for settlement failures."""


class DustTradeError(MarketError):
    """Swap would output nothing."""


class SlippageError(MarketError):
    """Swap output fell below the trade's minimum."""


class UnknownVenueError(MarketError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown venue"


class InconsistentSnapshotError(MarketError):
    """Two liquidity snapshots cannot be explained by a single swap."""


class ScenarioError(HintweaverError, ValueError):
    """Scenario file failed to load or validate."""
