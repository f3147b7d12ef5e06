from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich import print

from hintweaver.api.ui import Reporter
from hintweaver.errors import HintweaverError
from hintweaver.models.config import load_scenario
from hintweaver.sim.harness import run_scenario
from hintweaver.sim.reports import emit_reports

app = typer.Typer()


@app.callback(invoke_without_command=True)
def simulate(
    config: Path = typer.Option(..., "--config", "-c", exists=True, dir_okay=False),
    out: Path = typer.Option(Path("reports"), "--out", "-o", file_okay=False),
    seed: Optional[int] = typer.Option(None, help="Override the scenario seed."),  # noqa: UP007
    rounds: Optional[int] = typer.Option(None, min=1, help="Override round count."),  # noqa: UP007
):
    """Run a scenario and write its reports."""
    try:
        scenario = load_scenario(config)
        update = {k: v for k, v in (("seed", seed), ("rounds", rounds)) if v is not None}
        if update:
            scenario = scenario.copy(update=update)
        metrics = run_scenario(scenario)
        paths = emit_reports(metrics, scenario, out)
    except HintweaverError as e:
        print(f"[b red]error:[/] {e}")
        raise typer.Exit(1) from e

    Reporter().run_summary(metrics)
    if metrics.conservation_gap:
        print(f"[b red]value not conserved:[/] gap of {metrics.conservation_gap}")
        raise typer.Exit(1)
    print(f":tada:  [b bright_green]Reports written to {paths['summary'].parent}")
