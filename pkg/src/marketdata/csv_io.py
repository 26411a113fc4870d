"""CSV ingestion and serialization for candles and activity series."""

import datetime as dt
import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import pandas as pd

from .errors import (
    DuplicateDateError,
    HeaderError,
    MalformedRowError,
    MarketDataError,
    OpenInterestMismatchError,
)
from .records import (
    ACTIVITY_FIELDS,
    LEVERAGE_FIELDS,
    USD_FIELDS,
    ActivityRecord,
    ActivitySeries,
    Candle,
    SourceTag,
    fill_gaps,
    open_interest_matches,
)

logger = logging.getLogger(__name__)

CANDLE_HEADER = ("date", "open", "high", "low", "close")
ACTIVITY_HEADER = ("date",) + USD_FIELDS
ACTIVITY_HEADER_LEVERAGE = ACTIVITY_HEADER + LEVERAGE_FIELDS
IMPUTED_COLUMN = "imputed"

PathLike = Union[str, Path]


def _read_frame(text: str) -> pd.DataFrame:
    """Read CSV text into a frame of raw strings."""
    if not text.strip():
        raise HeaderError("Empty input: header row is required")
    try:
        return pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as e:
        raise MalformedRowError(f"Unreadable CSV: {e}") from None


def _cell(raw) -> str:
    if raw is None or (isinstance(raw, float) and math.isnan(raw)):
        return ""
    return str(raw).strip()


def _parse_date(raw, row: int) -> dt.date:
    text = _cell(raw)
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise MalformedRowError(f"Invalid ISO-8601 date {text!r}", row) from None


def _parse_number(raw, column: str, row: int) -> float:
    text = _cell(raw)
    if not text:
        raise MalformedRowError(f"Missing value in column {column}", row)
    try:
        return float(text)
    except ValueError:
        raise MalformedRowError(f"Invalid number {text!r} in column {column}", row) from None


def _parse_optional(raw, column: str, row: int):
    return None if not _cell(raw) else _parse_number(raw, column, row)


def parse_candles(text: str) -> List[Candle]:
    """
    Parse ``date,open,high,low,close`` CSV text.

    Args:
        text: CSV content with a header row

    Returns:
        Candles sorted by date

    Raises:
        HeaderError: Header is not the candle layout
        MalformedRowError: A row cannot be read
        OHLCInconsistencyError: Prices violate the OHLC ordering
        DuplicateDateError: A date appears twice
    """
    frame = _read_frame(text)
    if tuple(frame.columns) != CANDLE_HEADER:
        raise HeaderError(f"Expected header {','.join(CANDLE_HEADER)}, got {','.join(frame.columns)}")

    candles: Dict[dt.date, Tuple[int, Candle]] = {}
    for index, values in enumerate(frame.itertuples(index=False), start=1):
        date = _parse_date(values[0], index)
        prices = [_parse_number(values[i], CANDLE_HEADER[i], index) for i in range(1, 5)]
        try:
            candle = Candle(date, *prices)
        except MarketDataError as e:
            raise type(e)(e.message, index) from None
        if date in candles:
            raise DuplicateDateError(f"Duplicate date {date} (first seen at row {candles[date][0]})", index)
        candles[date] = (index, candle)

    return [candles[day][1] for day in sorted(candles)]


def parse_activity(
    text: str,
    source: Union[SourceTag, str],
    fill_missing_days: bool = False,
) -> ActivitySeries:
    """
    Parse activity CSV text into a validated series.

    The accepted headers are ``date,volume,oi_long,oi_short,liq_long,liq_short``
    optionally followed by ``lev_long,lev_short`` and/or ``imputed``.

    Args:
        text: CSV content with a header row
        source: Source tag of the data (``lob-cex`` enforces equal long/short OI)
        fill_missing_days: Forward-fill calendar gaps instead of rejecting them

    Returns:
        ActivitySeries ordered by date

    Raises:
        HeaderError, MalformedRowError, NegativeValueError, DuplicateDateError,
        DateGapError, OpenInterestMismatchError
    """
    source = SourceTag.parse(source) if isinstance(source, str) else source
    frame = _read_frame(text)
    columns = tuple(frame.columns)
    has_imputed = bool(columns) and columns[-1] == IMPUTED_COLUMN
    layout = columns[:-1] if has_imputed else columns
    if layout not in (ACTIVITY_HEADER, ACTIVITY_HEADER_LEVERAGE):
        raise HeaderError(
            "Expected header "
            f"{','.join(ACTIVITY_HEADER)}[,{','.join(LEVERAGE_FIELDS)}][,{IMPUTED_COLUMN}], "
            f"got {','.join(columns)}"
        )
    with_leverage = layout == ACTIVITY_HEADER_LEVERAGE

    rows: Dict[dt.date, Tuple[int, ActivityRecord]] = {}
    for index, values in enumerate(frame.itertuples(index=False), start=1):
        date = _parse_date(values[0], index)
        amounts = {name: _parse_number(values[i], name, index) for i, name in enumerate(USD_FIELDS, start=1)}
        if with_leverage:
            amounts["lev_long"] = _parse_optional(values[6], "lev_long", index)
            amounts["lev_short"] = _parse_optional(values[7], "lev_short", index)
        imputed = has_imputed and _cell(values[-1]).lower() in ("1", "true")
        try:
            record = ActivityRecord(date=date, imputed=imputed, **amounts)
        except MarketDataError as e:
            raise type(e)(e.message, index) from None
        if source is SourceTag.LOB_CEX and not open_interest_matches(record.oi_long, record.oi_short):
            raise OpenInterestMismatchError(
                f"CEX open interest differs: long {record.oi_long!r} vs short {record.oi_short!r}",
                index,
            )
        if date in rows:
            raise DuplicateDateError(f"Duplicate date {date} (first seen at row {rows[date][0]})", index)
        rows[date] = (index, record)

    ordered = [rows[day][1] for day in sorted(rows)]
    if fill_missing_days:
        before = len(ordered)
        ordered = fill_gaps(ordered)
        if len(ordered) != before:
            logger.info("forward-filled %d missing day(s)", len(ordered) - before)
    return ActivitySeries(tuple(ordered), source)


def candles_to_csv(candles: Sequence[Candle]) -> str:
    """Serialize candles in the ``candles.csv`` layout."""
    frame = pd.DataFrame(
        {
            "date": [c.date.isoformat() for c in candles],
            "open": [c.open for c in candles],
            "high": [c.high for c in candles],
            "low": [c.low for c in candles],
            "close": [c.close for c in candles],
        },
        columns=list(CANDLE_HEADER),
    )
    return frame.to_csv(index=False, lineterminator="\n")


def activity_to_csv(series: ActivitySeries) -> str:
    """Serialize an activity series in the ``activity.csv`` layout."""
    columns = list(ACTIVITY_HEADER_LEVERAGE if series.has_leverage else ACTIVITY_HEADER)
    data = {"date": [r.date.isoformat() for r in series]}
    for name in columns[1:]:
        data[name] = [getattr(r, name) for r in series]
    if any(r.imputed for r in series):
        columns.append(IMPUTED_COLUMN)
        data[IMPUTED_COLUMN] = [int(r.imputed) for r in series]
    return pd.DataFrame(data, columns=columns).to_csv(index=False, lineterminator="\n")


def read_candles(path: PathLike) -> List[Candle]:
    """Read and parse a ``candles.csv`` file."""
    return parse_candles(Path(path).read_text(encoding="utf-8"))


def read_activity(path: PathLike, source: Union[SourceTag, str], fill_missing_days: bool = False) -> ActivitySeries:
    """Read and parse an ``activity.csv`` file."""
    return parse_activity(Path(path).read_text(encoding="utf-8"), source, fill_missing_days)


def write_candles(candles: Sequence[Candle], path: PathLike) -> Path:
    path = Path(path)
    path.write_text(candles_to_csv(candles), encoding="utf-8")
    return path


def write_activity(series: ActivitySeries, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(activity_to_csv(series), encoding="utf-8")
    return path


__all__ = [
    "ACTIVITY_FIELDS",
    "activity_to_csv",
    "candles_to_csv",
    "parse_activity",
    "parse_candles",
    "read_activity",
    "read_candles",
    "write_activity",
    "write_candles",
]
