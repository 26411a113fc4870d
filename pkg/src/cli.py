"""Command-line interface for perplab."""

import argparse
import datetime as dt
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from rich.console import Console
from rich.table import Table

from . import __version__
from .agents.experiment import ExperimentConfig, run_batch, run_experiment, write_artifacts
from .config.analyzer import load_experiment_config, load_feed_config
from .config.render import render_config
from .decompose.arima import ArimaGrid, decompose_activity
from .econometrics.design import ExchangeKind, ModelKind, ModelSpec
from .econometrics.errors import DateMisalignmentError, UnsupportedModelError
from .econometrics.granger import DEFAULT_MAX_LAG, granger_pair
from .econometrics.summary import agreement_rate, compare_signs
from .econometrics.volatility_model import DEFAULT_M_GRID, fit_volatility_model
from .errors import DataError, NumericalError, PerpLabError, UsageError
from .marketdata.csv_io import read_activity, read_candles, write_activity, write_candles
from .marketdata.errors import MarketDataError
from .marketdata.records import Candle, SourceTag, log_returns
from .marketdata.remote import fetch_remote
from .reporting.artifacts import (
    read_liquidity_distribution,
    read_net_liquidity,
    write_decomposed_csv,
    write_liquidity_distribution,
)
from .reporting.table_gen import GrangerTableGenerator, RegressionTableGenerator, write_regression_csv
from .runtime.logging import configure_logging
from .volatility.garman_klass import volatility_series, write_volatility_csv

logger = logging.getLogger(__name__)

# Engine directory names and exchange kinds accepted as --activity labels.
KIND_BY_LABEL = {"lob": "cex", "cex": "cex", "oracle": "oracle", "vamm": "vamm"}
SOURCE_BY_KIND = {"cex": SourceTag.LOB_CEX, "oracle": SourceTag.ORACLE, "vamm": SourceTag.VAMM}
CANDLE_COLUMNS = ("return", "sigma", "open", "high", "low", "close")


def parse_int_set(text: str) -> Tuple[int, ...]:
    """Parse ``a..b`` (inclusive), ``a,b,c`` or a single integer."""
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            values = tuple(range(low, high + 1))
        else:
            values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, a,b,c or an integer, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return values


def parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an ISO date YYYY-MM-DD, got {text!r}") from None


def parse_labelled_path(text: str) -> Tuple[str, Path]:
    """``label=path``; without a label the parent directory name is used."""
    if "=" in text:
        label, _, path = text.partition("=")
        if not label or not path:
            raise argparse.ArgumentTypeError(f"expected label=path, got {text!r}")
        return label, Path(path)
    path = Path(text)
    return path.parent.name or path.stem, path


def _read(reader: Callable, path: Path, *args):
    """Run a file reader, adding the file name to data errors."""
    try:
        return reader(path, *args)
    except MarketDataError as e:
        raise DataError(f"{path}: {e}") from e
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e.strerror or e}") from None


def _guard_output(path: Path, inputs: Iterable[Path]) -> Path:
    """Refuse to write over an input file."""
    target = path.resolve()
    for source in inputs:
        if source is not None and Path(source).resolve() == target:
            raise UsageError(f"Output {path} would overwrite input {source}")
    return path


def common_window(candles: Sequence[Candle], activity, label: str):
    """Trim candles and activity to the dates they share."""
    if not candles or not len(activity):
        raise DateMisalignmentError(f"{label}: empty candles or activity")
    start = max(candles[0].date, activity.dates[0])
    end = min(candles[-1].date, activity.dates[-1])
    if start > end:
        raise DateMisalignmentError(f"{label}: candles and activity share no dates")
    kept = [c for c in candles if start <= c.date <= end]
    window = activity.window(start, end)
    if len(kept) != len(window):
        raise DateMisalignmentError(f"{label}: candles have missing days between {start} and {end}")
    if len(kept) < max(len(candles), len(activity)):
        logger.info("%s: using the common window %s..%s (%d days)", label, start, end, len(kept))
    return kept, window


def align_series(series: Sequence[pd.Series]) -> pd.DataFrame:
    """Inner-join date-indexed series, dropping days where any value is missing."""
    frame = pd.concat(list(series), axis=1, join="inner").dropna()
    if frame.empty:
        names = ", ".join(str(s.name) for s in series)
        raise DateMisalignmentError(f"No common dates between {names}")
    return frame


class PerpLabCLI:
    """Command-line interface for perplab."""

    def __init__(self, console: Optional[Console] = None, err_console: Optional[Console] = None):
        """
        Initialize the CLI.

        Args:
            console: Console for tables and results (defaults to stdout)
            err_console: Console for logs and diagnostics (defaults to stderr)
        """
        self.console = console or Console()
        self.err_console = err_console or Console(stderr=True)
        self.parser = self._create_parser()
        self.commands: Dict[str, Callable[[argparse.Namespace], None]] = {
            "ingest": self._cmd_ingest,
            "simulate": self._cmd_simulate,
            "analyze": self._cmd_analyze,
            "granger": self._cmd_granger,
            "plotdata": self._cmd_plotdata,
        }

    def _create_parser(self) -> argparse.ArgumentParser:
        """
        Create and configure the argument parser.

        Returns:
            Configured ArgumentParser instance
        """
        parser = argparse.ArgumentParser(
            prog="perplab",
            description="perplab - perpetual-futures exchange simulation and volatility analysis",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        common.add_argument("--jobs", "-j", type=int, default=1, help="maximum worker processes (default: 1)")

        commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

        ingest = commands.add_parser(
            "ingest", parents=[common], help="validate and normalize candle/activity CSVs or a remote feed"
        )
        ingest.add_argument("--candles", type=Path, help="candles CSV (date,open,high,low,close)")
        ingest.add_argument("--activity", type=Path, help="activity CSV")
        ingest.add_argument(
            "--source",
            default=SourceTag.SIMULATED.value,
            choices=[tag.value for tag in SourceTag],
            help="source tag of --activity; lob-cex enforces equal long/short open interest",
        )
        ingest.add_argument("--fill-missing-days", action="store_true", help="forward-fill date gaps in --activity")
        ingest.add_argument("--feed", type=Path, help="remote feed config file")
        ingest.add_argument("--start", type=parse_date, help="first day of the remote range (YYYY-MM-DD)")
        ingest.add_argument("--end", type=parse_date, help="last day of the remote range (YYYY-MM-DD)")
        ingest.add_argument("--cache-dir", type=Path, default=Path(".perplab-cache"), help="remote response cache")
        ingest.add_argument("--out", "-o", type=Path, default=Path("data"), help="output directory (default: data/)")

        simulate = commands.add_parser("simulate", parents=[common], help="run an agent-based exchange experiment")
        simulate.add_argument("config", nargs="?", type=Path, help="experiment config file (default: built-in)")
        seeding = simulate.add_mutually_exclusive_group()
        seeding.add_argument("--seed", type=int, help="single seed, overrides the config")
        seeding.add_argument("--seeds", type=parse_int_set, help="batch of seeds: a..b or a,b,c")
        simulate.add_argument("--days", type=int, help="number of simulated days, overrides the config")
        simulate.add_argument("--out", "-o", type=Path, default=Path("runs"), help="output directory (default: runs/)")

        analyze = commands.add_parser(
            "analyze", parents=[common], help="decompose activity and fit the volatility model"
        )
        analyze.add_argument(
            "--activity",
            type=parse_labelled_path,
            action="append",
            required=True,
            metavar="LABEL=PATH",
            help="activity CSV; repeat for side-by-side columns",
        )
        analyze.add_argument(
            "--candles", type=Path, help="candles CSV shared by every input (default: candles.csv next to each activity)"
        )
        analyze.add_argument("--model", choices=[k.value for k in ModelKind], default=ModelKind.EQ2.value)
        analyze.add_argument(
            "--exchange-kind",
            choices=[k.value for k in ExchangeKind],
            help="exchange kind of every input (default: derived from labels lob/cex/oracle/vamm)",
        )
        analyze.add_argument("--robust", action="store_true", help="HC1 heteroskedasticity-robust standard errors")
        analyze.add_argument("--m-grid", type=parse_int_set, default=DEFAULT_M_GRID, help="volatility lag counts")
        analyze.add_argument("--max-p", type=int, default=ArimaGrid.max_p, help="largest ARIMA AR order")
        analyze.add_argument("--max-d", type=int, default=ArimaGrid.max_d, help="largest differencing order")
        analyze.add_argument("--max-q", type=int, default=ArimaGrid.max_q, help="largest ARIMA MA order")
        analyze.add_argument("--fill-missing-days", action="store_true", help="forward-fill date gaps in activity")
        analyze.add_argument("--clamp", action="store_true", help="clamp negative volatility radicands to zero")
        analyze.add_argument("--granger", action="store_true", help="also test return/activity Granger causality")
        analyze.add_argument("--max-lag", type=int, default=DEFAULT_MAX_LAG)
        analyze.add_argument("--out", "-o", type=Path, default=Path("analysis"), help="output directory")

        granger = commands.add_parser("granger", parents=[common], help="two-way Granger causality test")
        granger.add_argument("x", metavar="X", help="[label=]path[:column] of the first series")
        granger.add_argument("y", metavar="Y", help="[label=]path[:column] of the second series")
        granger.add_argument("--max-lag", type=int, default=DEFAULT_MAX_LAG)
        granger.add_argument("--out", "-o", type=Path, default=Path("analysis"), help="output directory")

        plotdata = commands.add_parser("plotdata", parents=[common], help="write plot-ready CSVs from a run")
        plotdata.add_argument("run", type=Path, help="artifact directory of a simulate run")
        plotdata.add_argument("--clamp", action="store_true", help="clamp negative volatility radicands to zero")
        plotdata.add_argument("--out", "-o", type=Path, default=Path("plots"), help="output directory")

        return parser

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Parse arguments, run the subcommand and map failures to exit codes.

        Returns:
            0 on success, 1 usage error, 2 data error, 3 numerical failure
        """
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return 0 if e.code in (0, None) else UsageError.exit_code

        configure_logging(args.verbose, self.err_console)
        try:
            if getattr(args, "jobs", 1) < 1:
                raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
            self.commands[args.command](args)
        except PerpLabError as e:
            return self._fail(str(e), e.exit_code, args.verbose)
        except OSError as e:
            where = f": {e.filename}" if e.filename else ""
            return self._fail(f"{e.strerror or e}{where}", DataError.exit_code, args.verbose)
        except Exception as e:
            return self._fail(f"Unexpected error: {e}", NumericalError.exit_code, args.verbose)
        return 0

    def _fail(self, message: str, code: int, verbose: int) -> int:
        self.err_console.print(f"Error: {message}", markup=False, highlight=False)
        if verbose >= 2:
            self.err_console.print_exception()
        return code

    def _done(self, message: str) -> None:
        self.console.print(f"[green]✓[/green] {message}", highlight=False)

    # -- ingest -------------------------------------------------------------

    def _cmd_ingest(self, args: argparse.Namespace) -> None:
        out: Path = args.out
        inputs = [args.candles, args.activity]
        if args.feed is not None:
            if args.candles is not None or args.activity is not None:
                raise UsageError("--feed cannot be combined with --candles or --activity")
            if args.start is None or args.end is None:
                raise UsageError("--feed needs --start and --end")
            if args.end < args.start:
                raise UsageError(f"--end {args.end} precedes --start {args.start}")
            feed = load_feed_config(args.feed)
            data = fetch_remote(feed, args.start, args.end, args.cache_dir)
            out.mkdir(parents=True, exist_ok=True)
            if feed.kind == "candles":
                path = write_candles(data, out / "candles.csv")
            else:
                path = write_activity(data, out / "activity.csv")
            self._done(f"{feed.name}: {len(data)} days written to {path}")
            return

        if args.candles is None and args.activity is None:
            raise UsageError("ingest needs --candles, --activity or --feed")
        out.mkdir(parents=True, exist_ok=True)
        if args.candles is not None:
            candles = _read(read_candles, args.candles)
            path = write_candles(candles, _guard_output(out / "candles.csv", inputs))
            self._done(f"{len(candles)} candles written to {path}")
        if args.activity is not None:
            activity = _read(read_activity, args.activity, args.source, args.fill_missing_days)
            path = write_activity(activity, _guard_output(out / "activity.csv", inputs))
            imputed = int(activity.imputed_mask.sum())
            suffix = f" ({imputed} imputed)" if imputed else ""
            self._done(f"{len(activity)} activity days{suffix} written to {path}")

    # -- simulate -----------------------------------------------------------

    def _cmd_simulate(self, args: argparse.Namespace) -> None:
        config = load_experiment_config(args.config) if args.config is not None else ExperimentConfig()
        overrides = {}
        if args.days is not None:
            overrides["days"] = args.days
        if args.seed is not None:
            overrides.update(seed=args.seed, seeds=())
        if args.seeds is not None:
            overrides["seeds"] = args.seeds
        try:
            config = replace(config, **overrides)
        except ValueError as e:
            raise UsageError(str(e)) from None

        out: Path = args.out
        if config.seeds:
            manifests = run_batch(config, config.seeds, out, args.jobs)
            (out / "config.conf").write_text(render_config(config), encoding="utf-8")
            for seed, manifest in zip(config.seeds, manifests):
                logger.info("seed %d: %s", seed, manifest)
            self._done(f"{len(manifests)} runs written to {out}")
            return

        result = run_experiment(config)
        written = write_artifacts(result, out)
        (out / "config.conf").write_text(render_config(config), encoding="utf-8")

        table = Table(title=f"{config.name} (seed {config.seed}, {config.days} days)")
        for name in ("engine", "fills", "liquidations", "rejections", "final close"):
            table.add_column(name, justify="left" if name == "engine" else "right")
        for kind, run in result.runs.items():
            close = run.candles[-1].close if run.candles else float("nan")
            table.add_row(kind, str(len(run.fills)), str(len(run.liquidations)), str(len(run.rejections)), f"{close:,.2f}")
        self.console.print(table)
        self._done(f"manifest written to {written['manifest.json']}")

    # -- analyze ------------------------------------------------------------

    def _exchange_kind(self, label: str, forced: Optional[str]) -> str:
        if forced is not None:
            return forced
        if label not in KIND_BY_LABEL:
            raise UsageError(
                f"Cannot tell the exchange kind of {label!r}; label it lob, cex, oracle or vamm or pass --exchange-kind"
            )
        return KIND_BY_LABEL[label]

    def _cmd_analyze(self, args: argparse.Namespace) -> None:
        labels = [label for label, _ in args.activity]
        if len(set(labels)) != len(labels):
            raise UsageError(f"--activity labels must be distinct, got {', '.join(labels)}")
        grid = ArimaGrid(args.max_p, args.max_d, args.max_q)
        out: Path = args.out
        inputs = [path for _, path in args.activity] + [args.candles]

        results = {}
        checks = {}
        granger_rows = []
        for label, path in args.activity:
            kind = self._exchange_kind(label, args.exchange_kind)
            template = ModelSpec.for_exchange(args.model, kind)
            activity = _read(read_activity, path, SOURCE_BY_KIND[kind], args.fill_missing_days)
            if template.model is ModelKind.EQ3 and not activity.has_leverage:
                raise UnsupportedModelError(f"{path}: the leverage model needs lev_long and lev_short columns")
            candles_path = args.candles if args.candles is not None else path.parent / "candles.csv"
            candles, activity = common_window(_read(read_candles, candles_path), activity, label)

            volatility = volatility_series(candles, clamp=args.clamp)
            out.mkdir(parents=True, exist_ok=True)
            write_volatility_csv(volatility, _guard_output(out / f"volatility_{label}.csv", inputs))
            decomposed = decompose_activity(activity, grid, template.roster, args.jobs)
            for series in decomposed.values():
                write_decomposed_csv(series, out / label)

            result = fit_volatility_model(volatility, decomposed, template, args.m_grid, args.robust, args.jobs)
            results[label] = result
            checks[label] = compare_signs(result, kind)
            logger.info("%s: %s with m=%d on %d days", label, template.label, result.lag_order, result.n_obs)
            if args.granger:
                granger_rows += self._activity_granger(label, candles, activity, path.parent, args.max_lag)

        table = RegressionTableGenerator(results)
        table.generate(out / "regression.txt")
        write_regression_csv(results, out / "regression.csv")
        self.console.print(table.to_rich(f"Volatility regression ({args.model})"))
        self._print_signs(checks)
        if granger_rows:
            self._write_granger(granger_rows, out)
        self._done(f"analysis written to {out}")

    def _activity_granger(self, label, candles, activity, directory: Path, max_lag: int):
        """Return against volume, and against net pool liquidity when the run recorded it."""
        dates = [c.date for c in candles]
        returns = pd.Series(log_returns(candles), index=dates, name=f"{label} return")
        volume = pd.Series(activity.column("volume"), index=list(activity.dates), name=f"{label} volume")
        pairs = [(returns, volume)]
        liquidity_path = directory / "liquidity.csv"
        if liquidity_path.exists():
            frame = _read(read_net_liquidity, liquidity_path)
            index = [dt.date.fromisoformat(str(d)) for d in frame["date"]]
            pairs.append(
                (returns, pd.Series(frame["net_liquidity_change"].to_numpy(float), index=index, name=f"{label} liquidity"))
            )
        rows = []
        for x, y in pairs:
            frame = align_series([x, y])
            rows += granger_pair(frame[x.name].to_numpy(), frame[y.name].to_numpy(), (x.name, y.name), max_lag)
        return rows

    def _print_signs(self, checks) -> None:
        table = Table(title="Coefficient signs against the expected pattern")
        for name in ("exchange", "variable", "expected", "coefficient", "t", "agrees"):
            table.add_column(name, justify="left" if name in ("exchange", "variable") else "right")
        for label, rows in checks.items():
            for check in rows:
                table.add_row(
                    label,
                    check.variable,
                    "+" if check.expected > 0 else "-",
                    f"{check.coefficient:.4g}",
                    f"{check.t_stat:.2f}",
                    "yes" if check.agrees else "no",
                )
        self.console.print(table)
        for label, rows in checks.items():
            self.console.print(f"{label}: {agreement_rate(rows):.0%} of expected signs reproduced", highlight=False)

    def _write_granger(self, results, out: Path) -> None:
        generator = GrangerTableGenerator(results)
        generator.generate(out / "granger.txt")
        generator.write_csv(out / "granger.csv")
        self.console.print(generator.to_rich())

    # -- granger ------------------------------------------------------------

    def _load_series(self, text: str) -> pd.Series:
        """Load ``[label=]path[:column]`` as a date-indexed series."""
        label, _, rest = text.partition("=") if "=" in text else ("", "", text)
        path_text, column = rest, None
        head, sep, tail = rest.rpartition(":")
        if sep and head and "/" not in tail and "\\" not in tail:
            path_text, column = head, tail
        path = Path(path_text)
        try:
            with path.open(encoding="utf-8") as handle:
                header = handle.readline().strip().split(",")
        except OSError as e:
            raise DataError(f"Cannot read {path}: {e.strerror or e}") from None

        if header[:2] == ["date", "open"]:
            candles = _read(read_candles, path)
            column = column or "return"
            if column not in CANDLE_COLUMNS:
                raise UsageError(f"{path}: candle series are {', '.join(CANDLE_COLUMNS)}, got {column!r}")
            if column == "return":
                values = log_returns(candles)
            elif column == "sigma":
                values = [p.sigma for p in volatility_series(candles)]
            else:
                values = [getattr(c, column) for c in candles]
            index = [c.date for c in candles]
        elif "net_liquidity_change" in header:
            frame = _read(read_net_liquidity, path)
            column = column or "net_liquidity_change"
            if column != "net_liquidity_change":
                raise UsageError(f"{path}: the only liquidity series is net_liquidity_change, got {column!r}")
            values = frame[column].to_numpy(float)
            index = [dt.date.fromisoformat(str(d)) for d in frame["date"]]
        elif "volume" in header:
            activity = _read(read_activity, path, SourceTag.SIMULATED)
            column = column or "volume"
            if column not in activity.available_fields():
                raise UsageError(f"{path}: no activity column {column!r}")
            values = activity.column(column)
            index = list(activity.dates)
        else:
            raise DataError(f"{path}: not a candles, activity or liquidity file (header {','.join(header)})")
        return pd.Series(values, index=index, name=label or column, dtype=float)

    def _cmd_granger(self, args: argparse.Namespace) -> None:
        x = self._load_series(args.x)
        y = self._load_series(args.y)
        if x.name == y.name:
            raise UsageError(f"Both series are called {x.name!r}; label them with label=path")
        frame = align_series([x, y])
        logger.info("granger on %d common days", len(frame))
        results = granger_pair(frame[x.name].to_numpy(), frame[y.name].to_numpy(), (x.name, y.name), args.max_lag)
        args.out.mkdir(parents=True, exist_ok=True)
        self._write_granger(results, args.out)
        self._done(f"Granger table written to {args.out / 'granger.txt'}")

    # -- plotdata -----------------------------------------------------------

    def _cmd_plotdata(self, args: argparse.Namespace) -> None:
        run: Path = args.run
        distribution = run / "vamm" / "liquidity_distribution.csv"
        if not distribution.exists():
            raise DataError(f"Missing artifact {distribution}; plotdata needs a run with a vamm engine")
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)

        buckets = _read(read_liquidity_distribution, distribution)
        written = [write_liquidity_distribution(buckets, _guard_output(out / "liquidity_distribution.csv", [distribution]))]
        sources = [("exogenous", run / "candles.csv")]
        sources += [(d.name, d / "candles.csv") for d in sorted(run.iterdir()) if (d / "candles.csv").is_file()]
        for name, path in sources:
            if path.is_file():
                points = volatility_series(_read(read_candles, path), clamp=args.clamp)
                written.append(write_volatility_csv(points, _guard_output(out / f"volatility_{name}.csv", [path])))

        total = sum(b.liquidity for b in buckets)
        self.console.print(f"{len(buckets)} liquidity buckets, total {total:,.6g}", highlight=False)
        for path in written:
            logger.info("wrote %s", path)
        self._done(f"{len(written)} plot files written to {out}")


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(PerpLabCLI().run(argv))
