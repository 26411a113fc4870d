"""Plot-ready CSV artifacts and their JSON sidecars."""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence, Union

import pandas as pd

from ..decompose.arima import DecomposedSeries
from ..marketdata.errors import HeaderError
from ..vamm.distribution import LiquidityBucket

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FILL_LOG_COLUMNS = ["step", "order_id", "side", "price", "qty", "liquidation_flag", "agent_class", "owner", "counterparty", "self_match"]
DISTRIBUTION_COLUMNS = ["bucket_low", "bucket_high", "liquidity"]


def _write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    return path


def write_json(payload: Mapping, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_decomposed_csv(series: DecomposedSeries, directory: PathLike) -> Path:
    """
    Write ``decomposed_<name>.csv`` and its ``.json`` sidecar with the chosen order.

    Returns:
        Path of the CSV file
    """
    directory = Path(directory)
    frame = pd.DataFrame(
        {
            "date": [d.isoformat() for d in series.dates],
            "expected": series.expected,
            "unexpected": series.unexpected,
            "warmup_flag": series.warmup.astype(int),
        },
        columns=["date", "expected", "unexpected", "warmup_flag"],
    )
    path = _write_frame(frame, directory / f"decomposed_{series.name}.csv")
    write_json(
        {
            "name": series.name,
            "order": {"p": series.order.p, "d": series.order.d, "q": series.order.q},
            "aic": series.aic,
            "warmup_rows": int(series.warmup.sum()),
            "observations": len(series),
        },
        directory / f"decomposed_{series.name}.json",
    )
    logger.info("wrote %s (ARIMA%s)", path, series.order)
    return path


def write_fill_log(fills: Iterable, path: PathLike) -> Path:
    """Write fills (objects with the fill-log attributes) as CSV."""
    frame = pd.DataFrame.from_records(
        [
            {
                "step": f.step,
                "order_id": f.order_id,
                "side": f.side.value,
                "price": f.price,
                "qty": f.qty,
                "liquidation_flag": int(f.liquidation),
                "agent_class": f.agent_class,
                "owner": f.owner,
                "counterparty": f.counterparty,
                "self_match": int(f.self_match),
            }
            for f in fills
        ],
        columns=FILL_LOG_COLUMNS,
    )
    return _write_frame(frame, path)


def write_liquidity_distribution(buckets: Sequence, path: PathLike) -> Path:
    """Write ``bucket_low,bucket_high,liquidity`` rows; header only when empty."""
    frame = pd.DataFrame.from_records(
        [{"bucket_low": b.low, "bucket_high": b.high, "liquidity": b.liquidity} for b in buckets],
        columns=DISTRIBUTION_COLUMNS,
    )
    return _write_frame(frame, path)


def write_net_liquidity(dates: Sequence, changes: Sequence[float], path: PathLike) -> Path:
    """Write the VAMM ``date,net_liquidity_change`` series."""
    frame = pd.DataFrame(
        {"date": [d.isoformat() for d in dates], "net_liquidity_change": list(changes)},
        columns=["date", "net_liquidity_change"],
    )
    return _write_frame(frame, path)


def read_net_liquidity(path: PathLike) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if list(frame.columns) != ["date", "net_liquidity_change"]:
        raise HeaderError(f"{path}: expected header date,net_liquidity_change")
    return frame


def read_liquidity_distribution(path: PathLike) -> List[LiquidityBucket]:
    """Read a file written by :func:`write_liquidity_distribution`."""
    frame = pd.read_csv(path)
    if list(frame.columns) != DISTRIBUTION_COLUMNS:
        raise HeaderError(f"{path}: expected header {','.join(DISTRIBUTION_COLUMNS)}")
    return [LiquidityBucket(float(low), float(high), float(value)) for low, high, value in frame.itertuples(index=False)]
