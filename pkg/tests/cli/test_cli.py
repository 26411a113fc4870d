"""End-to-end tests of the perplab command line."""

import datetime as dt
import io
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from rich.console import Console

from src.cli import PerpLabCLI, parse_int_set, parse_labelled_path
from src.config.analyzer import load_experiment_config
from src.marketdata.csv_io import read_activity, read_candles, write_activity, write_candles
from src.marketdata.records import ActivityRecord, ActivitySeries, Candle, SourceTag
from src.reporting.artifacts import read_liquidity_distribution

START = dt.date(2023, 1, 1)

SMOKE_CONFIG = """[experiment]
name = "cli-smoke"
days = 4
seed = 3
trading_steps_per_day = 4

[price]
steps_per_day = 8

[engine.lob]

[engine.vamm]
pool = concentrated
depth = 1000

[traders.informed]
count = 2
leverage = 2
activity = 0.5

[traders.uninformed]
count = 10
leverage = 3
activity = 0.3

[traders.speculator]
count = 2
leverage = 5
"""


class Runner:
    """Runs the CLI with captured consoles."""

    def __init__(self):
        self.out = io.StringIO()
        self.err = io.StringIO()

    def __call__(self, *argv) -> int:
        cli = PerpLabCLI(
            console=Console(file=self.out, width=400, color_system=None),
            err_console=Console(file=self.err, width=400, color_system=None),
        )
        return cli.run([str(a) for a in argv])

    @property
    def stdout(self) -> str:
        return self.out.getvalue()

    @property
    def stderr(self) -> str:
        return self.err.getvalue()


@pytest.fixture
def perplab():
    return Runner()


def ar1(rng, n, phi=0.8, level=100.0, scale=5.0):
    values = np.empty(n)
    values[0] = level
    for t in range(1, n):
        values[t] = level + phi * (values[t - 1] - level) + scale * rng.standard_normal()
    return np.abs(values)


def synthetic_market(directory, n=300, seed=0, leverage=False):
    """Random candles and persistent CEX activity for ``n`` days."""
    rng = np.random.default_rng(seed)
    dates = [START + dt.timedelta(days=i) for i in range(n)]
    closes = 100.0 * np.exp(np.cumsum(0.02 * rng.standard_normal(n)))
    opens = np.concatenate(([100.0], closes[:-1]))
    candles = [
        Candle(d, o, max(o, c) * (1 + 0.01 * rng.random()), min(o, c) * (1 - 0.01 * rng.random()), c)
        for d, o, c in zip(dates, opens, closes)
    ]
    oi = ar1(rng, n, level=500.0, scale=20.0)
    volume = ar1(rng, n, level=1000.0, scale=50.0)
    liq_long = ar1(rng, n, level=30.0, scale=3.0)
    liq_short = ar1(rng, n, level=30.0, scale=3.0)
    lev_long = ar1(rng, n, level=2.0, scale=0.1)
    lev_short = ar1(rng, n, level=3.0, scale=0.1)
    extra = {}
    records = []
    for i, d in enumerate(dates):
        if leverage:
            extra = {"lev_long": lev_long[i], "lev_short": lev_short[i]}
        records.append(ActivityRecord(d, volume[i], oi[i], oi[i], liq_long[i], liq_short[i], **extra))
    directory.mkdir(parents=True, exist_ok=True)
    write_candles(candles, directory / "candles.csv")
    write_activity(ActivitySeries(tuple(records), SourceTag.LOB_CEX), directory / "activity.csv")
    return candles


class TestArgumentHelpers:
    """Test cases for the argument converters."""

    def test_int_set(self):
        """Test ranges, lists and single integers."""
        assert parse_int_set("1..3") == (1, 2, 3)
        assert parse_int_set("4,2") == (4, 2)
        assert parse_int_set("7") == (7,)

    def test_bad_int_set(self):
        """Test rejected integer sets."""
        import argparse

        with pytest.raises(argparse.ArgumentTypeError):
            parse_int_set("a..b")
        with pytest.raises(argparse.ArgumentTypeError):
            parse_int_set("5..1")

    def test_labelled_path(self):
        """Test explicit and derived labels."""
        assert parse_labelled_path("cex=data/btc.csv") == ("cex", Path("data/btc.csv"))
        label, path = parse_labelled_path("runs/vamm/activity.csv")
        assert label == "vamm"
        assert path.name == "activity.csv"


class TestUsage:
    """Test cases for invocation errors."""

    def test_no_command(self, perplab):
        """Test that a missing subcommand is a usage error."""
        assert perplab() == 1

    def test_version(self, perplab):
        """Test that --version exits cleanly."""
        assert perplab("--version") == 0

    def test_seed_and_seeds_exclusive(self, perplab, tmp_path):
        """Test that --seed and --seeds cannot be combined."""
        assert perplab("simulate", "--seed", "1", "--seeds", "1..2", "--out", tmp_path) == 1

    def test_jobs_must_be_positive(self, perplab, tmp_path):
        """Test that --jobs 0 is rejected."""
        assert perplab("simulate", "--jobs", "0", "--out", tmp_path) == 1
        assert "--jobs" in perplab.stderr

    def test_config_syntax_error(self, perplab, tmp_path):
        """Test that a malformed config exits with 1 and names the line."""
        config = tmp_path / "bad.conf"
        config.write_text("[experiment]\ndays 4\n", encoding="utf-8")
        assert perplab("simulate", config, "--out", tmp_path / "run") == 1
        assert "line 2" in perplab.stderr
        assert "Traceback" not in perplab.stderr


class TestSimulate:
    """Test cases for the simulate subcommand."""

    def test_smoke_run(self, perplab, tmp_path):
        """Test that a smoke config writes every artifact and a replayable config."""
        config = tmp_path / "smoke.conf"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        out = tmp_path / "run"

        assert perplab("simulate", config, "--out", out) == 0

        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["name"] == "cli-smoke"
        assert set(manifest["engines"]) == {"lob", "vamm"}
        assert "vamm/liquidity_distribution.csv" in manifest["artifacts"]
        assert len(read_candles(out / "lob" / "candles.csv")) == 4
        assert load_experiment_config(out / "config.conf") == load_experiment_config(config)
        assert "manifest written" in perplab.stdout

    def test_overrides(self, perplab, tmp_path):
        """Test that --seed and --days override the config."""
        config = tmp_path / "smoke.conf"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        out = tmp_path / "run"

        assert perplab("simulate", config, "--seed", "11", "--days", "2", "--out", out) == 0

        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["seed"] == 11
        assert manifest["config"]["days"] == 2

    def test_seed_batch(self, perplab, tmp_path):
        """Test that --seeds writes one directory per seed."""
        config = tmp_path / "smoke.conf"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        out = tmp_path / "batch"

        assert perplab("simulate", config, "--seeds", "1..2", "--days", "2", "--out", out) == 0

        for seed in (1, 2):
            manifest = json.loads((out / f"seed-{seed}" / "manifest.json").read_text(encoding="utf-8"))
            assert manifest["seed"] == seed

    def test_unwritable_output(self, perplab, tmp_path):
        """Test that an output path blocked by a file is a data error."""
        config = tmp_path / "smoke.conf"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        blocker = tmp_path / "blocked"
        blocker.write_text("", encoding="utf-8")

        assert perplab("simulate", config, "--out", blocker / "run") == 2
        assert "Error:" in perplab.stderr


class TestPlotData:
    """Test cases for the plotdata subcommand."""

    def test_plot_files(self, perplab, tmp_path):
        """Test that a run with a VAMM engine yields distribution and volatility files."""
        config = tmp_path / "smoke.conf"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        run = tmp_path / "run"
        assert perplab("simulate", config, "--out", run) == 0

        plots = tmp_path / "plots"
        assert perplab("plotdata", run, "--out", plots) == 0

        source = read_liquidity_distribution(run / "vamm" / "liquidity_distribution.csv")
        copied = read_liquidity_distribution(plots / "liquidity_distribution.csv")
        assert copied == source
        assert sum(b.liquidity for b in copied) > 0
        for name in ("exogenous", "lob", "vamm"):
            frame = pd.read_csv(plots / f"volatility_{name}.csv")
            assert list(frame.columns) == ["date", "sigma"]
            assert len(frame) == 4
            assert (frame["sigma"] >= 0).all()

    def test_missing_vamm_artifact(self, perplab, tmp_path):
        """Test that a run without a VAMM engine is reported as missing data."""
        assert perplab("plotdata", tmp_path, "--out", tmp_path / "plots") == 2
        assert "liquidity_distribution.csv" in perplab.stderr


class TestIngest:
    """Test cases for the ingest subcommand."""

    def test_normalizes_inputs(self, perplab, tmp_path):
        """Test that valid files are rewritten in the canonical layout."""
        candles = tmp_path / "raw_candles.csv"
        candles.write_text("date,open,high,low,close\n2023-01-02,106,111,101,107\n2023-01-01,105,110,100,106\n")
        activity = tmp_path / "raw_activity.csv"
        activity.write_text(
            "date,volume,oi_long,oi_short,liq_long,liq_short\n"
            "2023-01-01,10,5e9,5e9,0,1\n"
            "2023-01-03,12,5e9,5e9,0,2\n"
        )
        out = tmp_path / "data"

        code = perplab(
            "ingest", "--candles", candles, "--activity", activity, "--source", "lob-cex", "--fill-missing-days",
            "--out", out,
        )

        assert code == 0
        assert [c.date.day for c in read_candles(out / "candles.csv")] == [1, 2]
        series = read_activity(out / "activity.csv", "lob-cex")
        assert len(series) == 3
        assert list(series.imputed_mask) == [False, True, False]

    def test_open_interest_mismatch(self, perplab, tmp_path):
        """Test that a CEX mismatch exits with 2 and names the file and row."""
        activity = tmp_path / "activity.csv"
        activity.write_text("date,volume,oi_long,oi_short,liq_long,liq_short\n2023-01-01,1,5e9,4e9,0,0\n")

        assert perplab("ingest", "--activity", activity, "--source", "lob-cex", "--out", tmp_path / "out") == 2
        assert "activity.csv" in perplab.stderr
        assert "row 1" in perplab.stderr

    def test_inconsistent_candle(self, perplab, tmp_path):
        """Test that high below low is a data error."""
        candles = tmp_path / "candles.csv"
        candles.write_text("date,open,high,low,close\n2023-01-01,105,100,110,106\n")
        assert perplab("ingest", "--candles", candles, "--out", tmp_path / "out") == 2

    def test_gap_rejected_by_default(self, perplab, tmp_path):
        """Test that a date gap is rejected without --fill-missing-days."""
        activity = tmp_path / "activity.csv"
        activity.write_text(
            "date,volume,oi_long,oi_short,liq_long,liq_short\n2023-01-01,1,1,1,0,0\n2023-01-03,1,1,1,0,0\n"
        )
        assert perplab("ingest", "--activity", activity, "--out", tmp_path / "out") == 2

    def test_refuses_to_overwrite_input(self, perplab, tmp_path):
        """Test that ingest does not write over its own input."""
        candles = tmp_path / "candles.csv"
        candles.write_text("date,open,high,low,close\n2023-01-01,105,110,100,106\n")
        before = candles.read_text()
        assert perplab("ingest", "--candles", candles, "--out", tmp_path) == 1
        assert candles.read_text() == before

    def test_nothing_to_ingest(self, perplab, tmp_path):
        """Test that ingest needs an input."""
        assert perplab("ingest", "--out", tmp_path) == 1

    def test_feed_needs_range(self, perplab, tmp_path):
        """Test that a feed without dates is a usage error."""
        assert perplab("ingest", "--feed", tmp_path / "feed.conf", "--out", tmp_path) == 1


class TestAnalyze:
    """Test cases for the analyze subcommand."""

    ARGS = ("--max-p", "1", "--max-d", "0", "--max-q", "0", "--m-grid", "1..2")

    def test_regression_outputs(self, perplab, tmp_path):
        """Test the files written for one CEX input."""
        synthetic_market(tmp_path / "cex")
        out = tmp_path / "analysis"

        assert perplab("analyze", "--activity", tmp_path / "cex" / "activity.csv", *self.ARGS, "--out", out) == 0

        table = (out / "regression.txt").read_text(encoding="utf-8")
        assert "Unexpected Volume" in table
        assert "OI long" not in table
        frame = pd.read_csv(out / "regression.csv")
        assert "unexpected_volume" in set(frame["variable"])
        assert "unexpected_oi_long" not in set(frame["variable"])
        assert list(pd.read_csv(out / "volatility_cex.csv").columns) == ["date", "sigma"]
        assert (out / "cex" / "decomposed_volume.csv").exists()
        assert (out / "cex" / "decomposed_volume.json").exists()
        assert "expected signs reproduced" in perplab.stdout

    def test_side_by_side(self, perplab, tmp_path):
        """Test two labelled inputs in one table."""
        synthetic_market(tmp_path / "a", seed=1)
        synthetic_market(tmp_path / "b", seed=2)
        out = tmp_path / "analysis"

        code = perplab(
            "analyze",
            "--activity", f"first={tmp_path / 'a' / 'activity.csv'}",
            "--activity", f"second={tmp_path / 'b' / 'activity.csv'}",
            "--exchange-kind", "cex",
            *self.ARGS,
            "--robust",
            "--out", out,
        )

        assert code == 0
        frame = pd.read_csv(out / "regression.csv")
        assert set(frame["column"]) == {"first", "second"}
        assert "HC1" in (out / "regression.txt").read_text(encoding="utf-8")

    def test_granger_subflow(self, perplab, tmp_path):
        """Test that --granger writes a two-way table."""
        synthetic_market(tmp_path / "cex")
        out = tmp_path / "analysis"

        code = perplab(
            "analyze", "--activity", tmp_path / "cex" / "activity.csv", *self.ARGS, "--granger", "--max-lag", "5",
            "--out", out,
        )

        assert code == 0
        frame = pd.read_csv(out / "granger.csv")
        assert list(frame.columns) == ["H0", "Max-lag", "F-statistics", "p-value"]
        assert list(frame["H0"]) == [
            "cex return does not Granger-cause cex volume",
            "cex volume does not Granger-cause cex return",
        ]
        assert set(frame["Max-lag"]) == {5}

    def test_leverage_model_needs_leverage(self, perplab, tmp_path):
        """Test that the leverage model on data without leverage is a usage error."""
        synthetic_market(tmp_path / "cex")
        code = perplab(
            "analyze", "--activity", tmp_path / "cex" / "activity.csv", "--model", "eq3", *self.ARGS,
            "--out", tmp_path / "analysis",
        )
        assert code == 1
        assert "leverage" in perplab.stderr

    def test_leverage_model_on_vamm(self, perplab, tmp_path):
        """Test that the leverage model is refused for VAMM inputs."""
        synthetic_market(tmp_path / "vamm")
        code = perplab(
            "analyze", "--activity", tmp_path / "vamm" / "activity.csv", "--model", "eq3", *self.ARGS,
            "--out", tmp_path / "analysis",
        )
        assert code == 1

    def test_leverage_model(self, perplab, tmp_path):
        """Test the leverage model on data with leverage columns."""
        synthetic_market(tmp_path / "cex", leverage=True)
        out = tmp_path / "analysis"
        code = perplab(
            "analyze", "--activity", tmp_path / "cex" / "activity.csv", "--model", "eq3", *self.ARGS, "--out", out,
        )
        assert code == 0
        assert "unexpected_lev_long" in set(pd.read_csv(out / "regression.csv")["variable"])

    def test_unknown_label(self, perplab, tmp_path):
        """Test that an unlabelled input of unknown kind is a usage error."""
        synthetic_market(tmp_path / "exchange")
        code = perplab("analyze", "--activity", tmp_path / "exchange" / "activity.csv", "--out", tmp_path / "x")
        assert code == 1
        assert "--exchange-kind" in perplab.stderr

    def test_missing_candles(self, perplab, tmp_path):
        """Test that a missing candles file is a data error."""
        synthetic_market(tmp_path / "cex")
        (tmp_path / "cex" / "candles.csv").unlink()
        code = perplab("analyze", "--activity", tmp_path / "cex" / "activity.csv", "--out", tmp_path / "x")
        assert code == 2
        assert "candles.csv" in perplab.stderr


class TestGranger:
    """Test cases for the granger subcommand."""

    def test_return_and_liquidity(self, perplab, tmp_path):
        """Test a causal pair built from returns and a lagged liquidity response."""
        candles = synthetic_market(tmp_path / "run")
        returns = np.array([np.log(c.close / c.open) for c in candles])
        rng = np.random.default_rng(5)
        change = np.concatenate(([0.0], 50.0 * returns[:-1])) + 0.1 * rng.standard_normal(len(returns))
        pd.DataFrame(
            {"date": [c.date.isoformat() for c in candles], "net_liquidity_change": change}
        ).to_csv(tmp_path / "run" / "liquidity.csv", index=False)
        out = tmp_path / "granger"

        code = perplab(
            "granger", tmp_path / "run" / "candles.csv", tmp_path / "run" / "liquidity.csv", "--max-lag", "5",
            "--out", out,
        )

        assert code == 0
        frame = pd.read_csv(out / "granger.csv")
        assert list(frame["H0"]) == [
            "return does not Granger-cause net_liquidity_change",
            "net_liquidity_change does not Granger-cause return",
        ]
        assert frame["p-value"][0] < 0.01
        text = (out / "granger.txt").read_text(encoding="utf-8")
        assert text.splitlines()[0].split(" | ")[0].strip() == "H0"

    def test_labels_and_columns(self, perplab, tmp_path):
        """Test labelled series with explicit columns."""
        synthetic_market(tmp_path / "run")
        activity = tmp_path / "run" / "activity.csv"
        out = tmp_path / "granger"

        code = perplab("granger", f"vol={activity}:volume", f"oi={activity}:oi_short", "--max-lag", "3", "--out", out)

        assert code == 0
        frame = pd.read_csv(out / "granger.csv")
        assert frame["H0"][0] == "vol does not Granger-cause oi"

    def test_same_names_rejected(self, perplab, tmp_path):
        """Test that two series need distinct labels."""
        synthetic_market(tmp_path / "run")
        candles = tmp_path / "run" / "candles.csv"
        assert perplab("granger", candles, candles, "--out", tmp_path / "g") == 1

    def test_unknown_column(self, perplab, tmp_path):
        """Test that a missing column is a usage error."""
        synthetic_market(tmp_path / "run")
        activity = tmp_path / "run" / "activity.csv"
        assert perplab("granger", f"{activity}:lev_long", f"{activity}:volume", "--out", tmp_path / "g") == 1

    def test_too_short(self, perplab, tmp_path):
        """Test that too few observations for the lag count is a numerical failure."""
        synthetic_market(tmp_path / "run", n=30)
        run = tmp_path / "run"
        code = perplab("granger", run / "candles.csv", f"{run / 'activity.csv'}:volume", "--out", tmp_path / "g")
        assert code == 3
