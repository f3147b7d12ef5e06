from __future__ import annotations

import numpy as np
import typer
from rich import print

from hintweaver.api.ui import Reporter
from hintweaver.dp.audit import neighbouring_pair, run_audit
from hintweaver.dp.mechanisms import count_mechanism, sum_mechanism
from hintweaver.errors import HintweaverError
from hintweaver.models.privacy import ContributionRecord, NoiseKind, QueryKind

app = typer.Typer()

LABEL = "match"


@app.callback(invoke_without_command=True)
def audit_dp(
    mechanism: QueryKind = typer.Option(QueryKind.COUNT, case_sensitive=False),
    epsilon: float = typer.Option(1.0, min=0.0),
    trials: int = typer.Option(1_000_000, min=1),
    bins: int = typer.Option(200, min=1),
    q: float = typer.Option(1.0, min=0.0, max=1.0, help="Subsample rate."),
    noise: NoiseKind = typer.Option(NoiseKind.LAPLACE, case_sensitive=False),
    delta: float = typer.Option(0.0, min=0.0),
    cap: float = typer.Option(1.0, help="Clamp cap of the sum mechanism."),
    identical: bool = typer.Option(False, help="Audit a dataset against itself."),
    seed: int = typer.Option(0),
    check: bool = typer.Option(False, help="Exit 1 when ε̂ exceeds the expected bound."),
    tolerance: float = typer.Option(0.1, help="Allowed excess of ε̂ over the expected bound."),
):
    """Empirically audit the ε of a count or sum mechanism on neighbouring datasets."""
    try:
        if mechanism is QueryKind.COUNT:
            mech = count_mechanism(epsilon, delta=delta, kind=noise, q=q, label=LABEL)
            X, X_prime = neighbouring_pair(label=LABEL)
        else:
            mech = sum_mechanism(epsilon, cap, delta=delta, kind=noise, q=q, label=LABEL)
            _, X_prime = neighbouring_pair(label=LABEL)
            X = X_prime.with_entry(ContributionRecord(txid="target", value=cap, labels={LABEL}))
        if identical:
            X_prime = X
        result = run_audit(mech, X, X_prime, trials, bins, np.random.default_rng(seed))
    except HintweaverError as e:
        print(f"[b red]error:[/] {e}")
        raise typer.Exit(1) from e

    expected = 0.0 if identical else mech.budget.epsilon_prime
    Reporter().audit(result, f"ε audit ({mechanism.value}, q={q})")
    print(f"expected bound: ε′ = {expected:.6f} (+{tolerance})")
    if check and result.epsilon_hat > expected + tolerance:
        print(f"[b red]audit failed:[/] ε̂ = {result.epsilon_hat:.4f}")
        raise typer.Exit(1)
