import shutil
from pathlib import Path
from tempfile import mkdtemp

import orjson
from typer.testing import CliRunner
from ward import fixture, test

from hintweaver.cli import app

SCENARIOS = Path(__file__).parent.parent / "scenarios"

runner = CliRunner()


@fixture
def tmp_path():
    _tmp_path = Path(mkdtemp())
    yield _tmp_path
    shutil.rmtree(_tmp_path, ignore_errors=True)


@test("simulate writes every report for a scenario")
def _(out: Path = tmp_path):
    result = runner.invoke(
        app, ["simulate", "-c", str(SCENARIOS / "default.yaml"), "-o", str(out), "--rounds", "2"]
    )
    assert result.exit_code == 0, result.output
    summary = orjson.loads((out / "summary.json").read_bytes())
    assert summary["totals"]["rounds"] == 2
    assert (out / "rounds.csv").exists()
    assert (out / "report.md").exists()


@test("simulate exits non-zero on an invalid scenario")
def _(out: Path = tmp_path):
    bad = out / "bad.yaml"
    bad.write_text("seed: 1\nsubsample_rate: 2.0\npools: []\n")
    result = runner.invoke(app, ["simulate", "-c", str(bad), "-o", str(out / "reports")])
    assert result.exit_code == 1
    assert not (out / "reports").exists()


@test("oracle agrees with the grid search")
def _():
    result = runner.invoke(
        app, ["oracle", "--pool-a", "1000000,1000000", "--pool-b", "900000,1000000"]
    )
    assert result.exit_code == 0, result.output
    bad = runner.invoke(app, ["oracle", "--pool-a", "1000000", "--pool-b", "1,1"])
    assert bad.exit_code != 0


@test("audit of identical datasets passes its check")
def _():
    result = runner.invoke(
        app, ["audit-dp", "--trials", "100000", "--bins", "20", "--identical", "--check"]
    )
    assert result.exit_code == 0, result.output
