from __future__ import annotations

import csv
from pathlib import Path
from typing import Any

import attrs
import orjson
from loguru import logger
from mako.template import Template

from hintweaver.errors import HintweaverError
from hintweaver.models.config import ScenarioConfig
from hintweaver.sim.harness import RoundRecord, RunMetrics

ROUND_COLUMNS = tuple(a.name for a in attrs.fields(RoundRecord) if a.name != "aggregates")
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def summary_document(metrics: RunMetrics) -> dict[str, Any]:
    attack = [attrs.asdict(a) for a in metrics.attack]
    errors = [abs(a.estimate - a.truth) for a in metrics.attack if a.estimate is not None]
    return {
        "name": metrics.name,
        "seed": metrics.seed,
        "totals": metrics.totals(),
        "searchers": metrics.by_searcher(),
        "kickbacks": metrics.kickbacks,
        "budget_spent": metrics.budget_spent,
        "budget_trace": metrics.budget_trace,
        "releases": [
            {"round": r.round, "digest": r.digest, "aggregates": r.aggregates}
            for r in metrics.rounds
        ],
        "attack": {
            "rounds": attack,
            "mae": sum(errors) / len(errors) if errors else None,
            "sybils_settled": sum(a.sybils_settled for a in metrics.attack),
        }
        if metrics.attack
        else None,
    }


def write_rounds(metrics: RunMetrics, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ROUND_COLUMNS)
        writer.writeheader()
        for record in metrics.rounds:
            row = attrs.asdict(record)
            row.pop("aggregates")
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def render_report(metrics: RunMetrics, config: ScenarioConfig) -> str:
    tmpl = Template(filename=str(Path(__file__).parent / "report.mako"))
    return tmpl.render(metrics=metrics, config=config, summary=summary_document(metrics))


def emit_reports(
    metrics: RunMetrics, config: ScenarioConfig, out_dir: Path | str
) -> dict[str, Path]:
    """Write rounds.csv, summary.json, scenario.yaml and report.md into `out_dir`."""
    out = Path(out_dir)
    paths = {
        "rounds": out / "rounds.csv",
        "summary": out / "summary.json",
        "scenario": out / "scenario.yaml",
        "report": out / "report.md",
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_rounds(metrics, paths["rounds"])
        paths["summary"].write_bytes(orjson.dumps(summary_document(metrics), option=JSON_OPTIONS))
        paths["scenario"].write_text(config.echo())
        paths["report"].write_text(render_report(metrics, config))
    except OSError as e:
        raise HintweaverError(f"cannot write reports to {out}: {e}") from e
    logger.info("wrote reports to {}", out)
    return paths
