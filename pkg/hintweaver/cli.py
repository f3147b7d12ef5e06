#!/usr/bin/env python3

import typer
from rich.traceback import install

from hintweaver.app.attack import app as attack_app
from hintweaver.app.audit import app as audit_app
from hintweaver.app.duel import app as duel_app
from hintweaver.app.oracle import app as oracle_app
from hintweaver.app.simulate import app as simulate_app
from hintweaver.logger import VerbosityLevel, configure_log

install(show_locals=True, suppress=["typer", "click", "transitions"])

app = typer.Typer()
app.add_typer(simulate_app, name="simulate")
app.add_typer(audit_app, name="audit-dp")
app.add_typer(attack_app, name="attack")
app.add_typer(oracle_app, name="oracle")
app.add_typer(duel_app, name="duel")


@app.callback(no_args_is_help=True)
def cli(
    verbosity: int = typer.Option(
        VerbosityLevel.ERROR,
        "--verbose",
        "-v",
        callback=configure_log,
        count=True,
        max=VerbosityLevel.ALL,
    )
):
    """Differentially private aggregate hints for MEV order-flow auctions."""


if __name__ == "__main__":
    app()
