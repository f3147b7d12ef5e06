from __future__ import annotations

from collections.abc import Mapping, Sequence

import attrs
from rich import get_console
from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from hintweaver.adversary.experiment import AttackOutcome
from hintweaver.dp.audit import AuditResult
from hintweaver.market.amm import Arbitrage
from hintweaver.sim.harness import PairedResult, RunMetrics

SEARCHER_COLUMNS = ("templates", "wins", "gross", "gas", "kickback", "net")


def _fmt(value: float | None, spec: str = ".4g") -> str:
    return "n/a" if value is None else format(value, spec)


@attrs.define
class Reporter:
    console: Console = attrs.field(factory=get_console)

    def panel(self, table: Table, title: str) -> None:
        self.console.print(Align.center(Panel(table, title=title, expand=False)))

    def run_summary(self, metrics: RunMetrics) -> None:
        totals = Table("Metric", "Value", highlight=True)
        for key, value in metrics.totals().items():
            totals.add_row(key, _fmt(value) if isinstance(value, float) else str(value))
        self.panel(totals, f"[b]{metrics.name}[/b] (seed {metrics.seed})")

        searchers = Table("Searcher", "Templates", "Wins", "Gross", "Gas", "Kickback", "Net")
        for sid, row in metrics.by_searcher().items():
            searchers.add_row(sid, *(str(row[k]) for k in SEARCHER_COLUMNS))
        if searchers.row_count:
            self.panel(searchers, "Searchers")

    def audit(self, result: AuditResult, title: str = "ε audit") -> None:
        table = Table("Configured ε", "ε̂", "raw ε̂", "Scored bins", "Trials", highlight=True)
        table.add_row(
            _fmt(result.configured_epsilon),
            _fmt(result.epsilon_hat),
            _fmt(result.raw_epsilon_hat),
            f"{result.scored_bins}/{result.bins}",
            str(result.trials),
        )
        self.panel(table, title)

    def attack(self, outcomes: Sequence[AttackOutcome]) -> None:
        table = Table(
            "q", "Trials", "Skipped", "MAE", "MAE CI", "p5", "p50", "p95", "ε′", highlight=True
        )
        for o in outcomes:
            quantiles = o.error_quantiles
            table.add_row(
                _fmt(o.q),
                str(o.trials),
                str(o.skipped),
                _fmt(o.mae),
                f"[{_fmt(o.mae_ci[0])}, {_fmt(o.mae_ci[1])}]",
                *(_fmt(quantiles[k]) for k in ("p5", "p50", "p95")),
                _fmt(o.epsilon_prime, ".6f"),
            )
        variant = outcomes[0].variant.value if outcomes else "-"
        self.panel(table, f"Sybil attack ({variant})")

    def oracle(self, results: Mapping[str, Arbitrage]) -> None:
        table = Table("Method", "Amount in", "Profit", "Buy", "Sell", highlight=True)
        for method, arb in results.items():
            table.add_row(
                method,
                str(arb.amount_in),
                str(arb.expected_profit),
                arb.buy_venue or "-",
                arb.sell_venue or "-",
            )
        self.panel(table, "Arbitrage oracle")

    def duel(self, result: PairedResult, pvalues: Mapping[str, float | None] | None = None) -> None:
        table = Table("Strategy", "Mean gross", "Mean best", "Mean net", "Wins", "p (≤ first)")
        pvalues = pvalues or {}
        for name in result.strategies:
            table.add_row(
                name,
                _fmt(result.mean(name, "gross"), ".1f"),
                _fmt(result.mean(name, "best_gross"), ".1f"),
                _fmt(result.mean(name, "net"), ".1f"),
                str(int((result.column(name, "gross") > 0).sum())),
                _fmt(pvalues.get(name)),
            )
        self.panel(table, f"Paired rounds ({len(result.rounds)})")
