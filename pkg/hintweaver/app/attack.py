from __future__ import annotations

from pathlib import Path
from typing import Optional

import orjson
import typer
from rich import print

from hintweaver.adversary.experiment import AttackVariant, run_attack_experiment
from hintweaver.api.ui import Reporter
from hintweaver.errors import HintweaverError
from hintweaver.models.config import load_scenario
from hintweaver.sim.harness import attack_setup
from hintweaver.sim.reports import JSON_OPTIONS

app = typer.Typer()


def parse_rates(value: str) -> list[float]:
    try:
        rates = [float(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise typer.BadParameter(f"expected comma-separated rates, got {value!r}") from e
    if not rates or any(not 0 < q <= 1 for q in rates):
        raise typer.BadParameter("rates must lie in (0, 1]")
    return rates


@app.callback(invoke_without_command=True)
def attack(
    config: Path = typer.Option(..., "--config", "-c", exists=True, dir_okay=False),
    q: str = typer.Option("0.25,0.5,1.0", help="Comma-separated subsample rates."),
    trials: int = typer.Option(10_000, min=1),
    variant: AttackVariant = typer.Option(AttackVariant.ISOLATION, case_sensitive=False),
    seed: Optional[int] = typer.Option(None),  # noqa: UP007
    noise: bool = typer.Option(True, help="Disable to see the attack without DP noise."),
    out: Optional[Path] = typer.Option(None, dir_okay=False, help="JSON output."),  # noqa: UP007
):
    """Run the sybil poisoning attack against the scenario's sum aggregate."""
    rates = parse_rates(q)
    try:
        scenario = load_scenario(config)
        outcomes = run_attack_experiment(
            attack_setup(scenario),
            rates,
            trials,
            seed=scenario.seed if seed is None else seed,
            variant=variant,
            noise_enabled=noise,
        )
    except HintweaverError as e:
        print(f"[b red]error:[/] {e}")
        raise typer.Exit(1) from e

    Reporter().attack(outcomes)
    if out is not None:
        out.write_bytes(orjson.dumps([o.summary() for o in outcomes], option=JSON_OPTIONS))
