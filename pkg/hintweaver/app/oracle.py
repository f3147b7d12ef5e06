from __future__ import annotations

import typer
from rich import print

from hintweaver.api.ui import Reporter
from hintweaver.errors import HintweaverError
from hintweaver.market.amm import grid_search_arb, optimal_arb_amount
from hintweaver.models.market import Pair, PoolState

app = typer.Typer()

PAIR = Pair.parse("T1/T2")


def parse_reserves(value: str) -> tuple[int, int]:
    try:
        l1, l2 = (int(part) for part in value.split(","))
    except ValueError as e:
        raise typer.BadParameter(f"expected 'l1,l2', got {value!r}") from e
    return l1, l2


@app.callback(invoke_without_command=True)
def oracle(
    pool_a: str = typer.Option(..., help="Reserves 'l1,l2' of venue a."),
    pool_b: str = typer.Option(..., help="Reserves 'l1,l2' of venue b."),
    fee: int = typer.Option(3000, min=0, max=999_999, help="Fee in parts per million."),
    grid: bool = typer.Option(True, help="Cross-check with the exhaustive grid search."),
):
    """Optimal arbitrage between two pools of one pair, by closed form and by grid search."""
    try:
        a = PoolState("a", PAIR, *parse_reserves(pool_a), fee_ppm=fee)
        b = PoolState("b", PAIR, *parse_reserves(pool_b), fee_ppm=fee)
        results = {"closed form": optimal_arb_amount(a, b)}
        if grid:
            results["grid search"] = grid_search_arb(a, b)
    except HintweaverError as e:
        print(f"[b red]error:[/] {e}")
        raise typer.Exit(1) from e

    Reporter().oracle(results)
    if grid:
        gap = abs(results["closed form"].expected_profit - results["grid search"].expected_profit)
        if gap > 1:
            print(f"[b red]closed form misses the grid optimum by {gap}")
            raise typer.Exit(1)
