"""Text, CSV and console renderings of regression and Granger results."""

import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

import pandas as pd
from rich.table import Table

from ..econometrics.granger import GrangerResult
from ..econometrics.ols import RegressionResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ABSENT = "-"

_LABELS = {
    "const": "Intercept",
    "oi_long": "OI long",
    "oi_short": "OI short",
    "volume": "Volume",
    "liq_long": "Liquidation long",
    "liq_short": "Liquidation short",
    "lev_long": "Leverage long",
    "lev_short": "Leverage short",
}


def significance_stars(p_value: float) -> str:
    """``***`` below 0.01, ``**`` below 0.05, ``*`` below 0.1."""
    if math.isnan(p_value):
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def variable_label(name: str) -> str:
    """Human-readable row label for a design column."""
    if name in _LABELS:
        return _LABELS[name]
    if name.startswith("sigma_lag_"):
        return f"Volatility (t-{name.rsplit('_', 1)[1]})"
    for prefix in ("expected_", "unexpected_"):
        if name.startswith(prefix):
            return f"{prefix[:-1].capitalize()} {_LABELS.get(name[len(prefix):], name[len(prefix):])}"
    return name


def _row_order(results: Mapping[str, RegressionResult]) -> List[str]:
    names: List[str] = []
    for result in results.values():
        for name in result.names:
            if name not in names:
                names.append(name)
    lags = sorted((n for n in names if n.startswith("sigma_lag_")), key=lambda n: int(n.rsplit("_", 1)[1]))
    rest = [n for n in names if not n.startswith("sigma_lag_") and n != "const"]
    return (["const"] if "const" in names else []) + lags + rest


def _format_coefficient(value: float) -> str:
    return f"{value:.4g}"


def _format_t(value: float) -> str:
    return f"({value:.3f})" if math.isfinite(value) else "(inf)"


class RegressionTableGenerator:
    """Generates a side-by-side regression table, one column per fitted model."""

    def __init__(self, results: Mapping[str, RegressionResult]):
        """
        Initialize the generator.

        Args:
            results: Fitted models keyed by column label (exchange name)
        """
        self.results = dict(results)
        self.lines: List[str] = []

    def generate(self, output_path: PathLike = None) -> str:
        """
        Build the table text and optionally write it.

        Each variable takes two lines: the coefficient with significance
        stars, then its t-statistic in parentheses. Variables a model does
        not have are shown as ``-``.

        Args:
            output_path: File to write, or None to only return the text

        Returns:
            The table as a string
        """
        self.lines = []
        labels = list(self.results)
        rows = _row_order(self.results)
        cells: List[List[str]] = [["Variable"] + labels]

        for name in rows:
            coefficient_row = [variable_label(name)]
            t_row = [""]
            for result in self.results.values():
                if name in result.names:
                    i = result.index(name)
                    coefficient_row.append(
                        _format_coefficient(result.coefficients[i]) + significance_stars(result.p_values[i])
                    )
                    t_row.append(_format_t(result.t_stats[i]))
                else:
                    coefficient_row.append(ABSENT)
                    t_row.append("")
            cells.extend([coefficient_row, t_row])

        cells.append(["Adjusted R2"] + [f"{r.adj_r2:.4f}" for r in self.results.values()])
        cells.append(["AIC"] + [f"{r.aic:.2f}" for r in self.results.values()])
        cells.append(["No. of obs."] + [str(r.n_obs) for r in self.results.values()])
        cells.append(["Lag order (m)"] + [str(r.lag_order) if r.lag_order else ABSENT for r in self.results.values()])

        self._emit(cells)
        if any(r.robust for r in self.results.values()):
            self.lines.append("t-statistics use heteroskedasticity-robust (HC1) standard errors.")
        self.lines.append("*, **, *** denote significance at 0.1, 0.05 and 0.01.")
        text = "\n".join(self.lines) + "\n"

        if output_path is not None:
            output_file = Path(output_path)
            output_file.parent.mkdir(parents=True, exist_ok=True)
            output_file.write_text(text, encoding="utf-8")
            logger.info("wrote %s", output_file)
        return text

    def _emit(self, cells: List[List[str]]) -> None:
        widths = [max(len(row[c]) for row in cells) for c in range(len(cells[0]))]
        rule = "-+-".join("-" * w for w in widths)
        for index, row in enumerate(cells):
            self.lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if index == 0:
                self.lines.append(rule)

    def to_rich(self, title: str = "Volatility regression") -> Table:
        """Console rendering of the same table."""
        table = Table(title=title)
        table.add_column("Variable")
        for label in self.results:
            table.add_column(label, justify="right")
        for name in _row_order(self.results):
            row = [variable_label(name)]
            for result in self.results.values():
                if name in result.names:
                    i = result.index(name)
                    row.append(
                        f"{_format_coefficient(result.coefficients[i])}{significance_stars(result.p_values[i])} "
                        f"{_format_t(result.t_stats[i])}"
                    )
                else:
                    row.append(ABSENT)
            table.add_row(*row)
        table.add_row("Adjusted R2", *[f"{r.adj_r2:.4f}" for r in self.results.values()])
        table.add_row("AIC", *[f"{r.aic:.2f}" for r in self.results.values()])
        table.add_row("No. of obs.", *[str(r.n_obs) for r in self.results.values()])
        return table


def regression_frame(results: Mapping[str, RegressionResult]) -> pd.DataFrame:
    """Long-format frame: one row per (column, variable) plus summary rows."""
    records: List[Dict[str, object]] = []
    for label, result in results.items():
        for i, name in enumerate(result.names):
            records.append(
                {
                    "column": label,
                    "variable": name,
                    "coefficient": result.coefficients[i],
                    "std_error": result.std_errors[i],
                    "t_stat": result.t_stats[i],
                    "p_value": result.p_values[i],
                    "stars": significance_stars(result.p_values[i]),
                }
            )
        for name, value in (
            ("adj_r2", result.adj_r2),
            ("aic", result.aic),
            ("n_obs", result.n_obs),
            ("lag_order", result.lag_order),
        ):
            records.append({"column": label, "variable": name, "coefficient": value})
    columns = ["column", "variable", "coefficient", "std_error", "t_stat", "p_value", "stars"]
    return pd.DataFrame.from_records(records, columns=columns)


def write_regression_csv(results: Mapping[str, RegressionResult], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    regression_frame(results).to_csv(path, index=False, lineterminator="\n")
    return path


class GrangerTableGenerator:
    """Generates the Granger-causality table: H0, Max-lag, F-statistics, p-value."""

    HEADER = ("H0", "Max-lag", "F-statistics", "p-value")

    def __init__(self, results: Sequence[GrangerResult]):
        self.results = list(results)
        self.lines: List[str] = []

    def rows(self) -> List[List[str]]:
        return [
            [r.hypothesis, str(r.max_lag), f"{r.f_stat:.3f}", f"{r.p_value:.3f}"]
            for r in self.results
        ]

    def generate(self, output_path: PathLike = None) -> str:
        self.lines = []
        cells = [list(self.HEADER)] + self.rows()
        widths = [max(len(row[c]) for row in cells) for c in range(len(self.HEADER))]
        for index, row in enumerate(cells):
            self.lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
            if index == 0:
                self.lines.append("-+-".join("-" * w for w in widths))
        text = "\n".join(self.lines) + "\n"
        if output_path is not None:
            output_file = Path(output_path)
            output_file.parent.mkdir(parents=True, exist_ok=True)
            output_file.write_text(text, encoding="utf-8")
        return text

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "H0": [r.hypothesis for r in self.results],
                "Max-lag": [r.max_lag for r in self.results],
                "F-statistics": [r.f_stat for r in self.results],
                "p-value": [r.p_value for r in self.results],
            },
            columns=list(self.HEADER),
        )

    def write_csv(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(path, index=False, lineterminator="\n")
        return path

    def to_rich(self, title: str = "Granger causality") -> Table:
        table = Table(title=title)
        for name in self.HEADER:
            table.add_column(name, justify="left" if name == "H0" else "right")
        for row in self.rows():
            table.add_row(*row)
        return table
