from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
import typer
from rich import print
from scipy import stats

from hintweaver.api.ui import Reporter
from hintweaver.errors import HintweaverError
from hintweaver.models.config import load_scenario
from hintweaver.searchers.strategies import StrategyKind
from hintweaver.sim.harness import PairedResult, run_paired_rounds

app = typer.Typer()


def paired_pvalues(
    result: PairedResult, metric: str = "net", alternative: str = "less"
) -> dict[str, float | None]:
    """
    One-sided paired t-test p-values of each strategy against the first one.

    With `alternative="less"` a small p-value says the strategy does worse than the first;
    with `"greater"` that it does better. None when the differences are constant.
    """
    first = result.strategies[0]
    baseline = result.column(first, metric)
    out: dict[str, float | None] = {first: None}
    for name in result.strategies[1:]:
        diff = result.column(name, metric) - baseline
        if len(diff) < 2 or np.all(diff == diff[0]):
            out[name] = None
            continue
        ttest = stats.ttest_rel(result.column(name, metric), baseline, alternative=alternative)
        out[name] = float(ttest.pvalue)
    return out


@app.callback(invoke_without_command=True)
def duel(
    config: Path = typer.Option(..., "--config", "-c", exists=True, dir_okay=False),
    strategies: str = typer.Option("contract,brute_force", help="Comma-separated strategies."),
    rounds: int = typer.Option(500, min=1),
    seed: Optional[int] = typer.Option(None),  # noqa: UP007
    victim_spec: Optional[str] = typer.Option(None, help="Victims opt into it."),  # noqa: UP007
    k: Optional[int] = typer.Option(None, min=0, help="Templates per victim."),  # noqa: UP007
):
    """Compare strategies on identical victims, round by round."""
    try:
        names = [StrategyKind(s.strip()).value for s in strategies.split(",") if s.strip()]
    except ValueError as e:
        raise typer.BadParameter(str(e)) from e
    try:
        result = run_paired_rounds(
            load_scenario(config), names, rounds, seed=seed, victim_spec=victim_spec, k=k
        )
    except HintweaverError as e:
        print(f"[b red]error:[/] {e}")
        raise typer.Exit(1) from e
    Reporter().duel(result, paired_pvalues(result))
