"""Remote feed client with an on-disk response cache.

A feed is described by a :class:`FeedConfig`: an endpoint URL template, the
name of the environment variable holding the API key, and a mapping from
our field names to the fields of the JSON records the endpoint returns.
Every raw response body is cached under ``cache_dir/<feed>/<start>_<end>.json``
so reruns are offline and byte-identical.
"""

import datetime as dt
import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import requests

from .errors import MalformedRowError, PartialDataError, SchemaMappingError, TransportError
from .records import ACTIVITY_FIELDS, LEVERAGE_FIELDS, ActivityRecord, ActivitySeries, Candle, SourceTag

logger = logging.getLogger(__name__)

CANDLE_FIELDS = ("open", "high", "low", "close")
FEED_KINDS = ("candles", "activity")
DATE_FORMATS = ("iso", "unix", "unix_ms")


@dataclass(frozen=True)
class FeedConfig:
    """Description of one remote endpoint.

    ``url`` may reference ``{start}``, ``{end}`` (ISO dates) and
    ``{start_ts}``, ``{end_ts}`` (unix seconds, end of day inclusive).
    """

    name: str
    kind: str
    url: str
    fields: Mapping[str, str]
    date_field: str = "date"
    date_format: str = "iso"
    records_path: str = ""
    auth_env: Optional[str] = None
    auth_header: str = "Authorization"
    source: SourceTag = SourceTag.SIMULATED
    timeout: float = 30.0
    params: Mapping[str, str] = field(default_factory=dict)


def _cache_file(cache_dir: Path, feed: FeedConfig, start: dt.date, end: dt.date) -> Path:
    safe_name = re.sub(r"[^A-Za-z0-9_.-]", "_", feed.name)
    return cache_dir / safe_name / f"{start.isoformat()}_{end.isoformat()}.json"


def _render_url(feed: FeedConfig, start: dt.date, end: dt.date) -> str:
    start_ts = int(dt.datetime.combine(start, dt.time(), tzinfo=dt.timezone.utc).timestamp())
    end_ts = int(dt.datetime.combine(end, dt.time(23, 59, 59), tzinfo=dt.timezone.utc).timestamp())
    return feed.url.format(start=start.isoformat(), end=end.isoformat(), start_ts=start_ts, end_ts=end_ts)


def _download(feed: FeedConfig, start: dt.date, end: dt.date, session) -> bytes:
    headers = {}
    if feed.auth_env:
        token = os.environ.get(feed.auth_env)
        if token is None:
            raise TransportError(f"Environment variable {feed.auth_env} is not set for feed {feed.name!r}")
        headers[feed.auth_header] = token
    url = _render_url(feed, start, end)
    logger.info("fetching %s %s..%s", feed.name, start, end)
    try:
        response = session.get(url, headers=headers, params=dict(feed.params) or None, timeout=feed.timeout)
    except requests.RequestException as e:
        raise TransportError(f"Request to feed {feed.name!r} failed: {e}") from None
    if response.status_code >= 400:
        raise TransportError(f"Feed {feed.name!r} answered HTTP {response.status_code}")
    return response.content


def _store(path: Path, body: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_suffix(".part")
    partial.write_bytes(body)
    os.replace(partial, path)


def _records(payload: Any, records_path: str) -> List[Mapping[str, Any]]:
    node = payload
    for key in filter(None, records_path.split(".")):
        if not isinstance(node, Mapping) or key not in node:
            raise SchemaMappingError([records_path])
        node = node[key]
    if not isinstance(node, list):
        raise SchemaMappingError([records_path or "<root>"])
    return node


def _to_date(value: Any, date_format: str, row: int) -> dt.date:
    try:
        if date_format == "iso":
            return dt.date.fromisoformat(str(value)[:10])
        seconds = float(value) / (1000.0 if date_format == "unix_ms" else 1.0)
        return dt.datetime.fromtimestamp(seconds, tz=dt.timezone.utc).date()
    except (TypeError, ValueError, OverflowError):
        raise MalformedRowError(f"Cannot read date {value!r}", row) from None


def _to_float(value: Any, name: str, row: int) -> Optional[float]:
    if value is None or value == "":
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise MalformedRowError(f"Cannot read {name} value {value!r}", row) from None


def _map_payload(feed: FeedConfig, body: bytes, start: dt.date, end: dt.date):
    try:
        payload = json.loads(body)
    except ValueError:
        raise SchemaMappingError(["<json body>"]) from None
    rows = _records(payload, feed.records_path)

    expected = CANDLE_FIELDS if feed.kind == "candles" else tuple(
        name for name in ACTIVITY_FIELDS if name in feed.fields or name not in LEVERAGE_FIELDS
    )
    unknown = set(feed.fields) - set(CANDLE_FIELDS if feed.kind == "candles" else ACTIVITY_FIELDS)
    missing_mapping = [name for name in expected if name not in feed.fields]
    if unknown or missing_mapping:
        raise SchemaMappingError(sorted(unknown) + missing_mapping)
    if rows:
        remote_names = [feed.date_field] + [feed.fields[name] for name in expected]
        unmatched = {name for name in remote_names if not all(name in row for row in rows)}
        if unmatched:
            raise SchemaMappingError(unmatched)

    by_date: Dict[dt.date, Dict[str, Optional[float]]] = {}
    for index, row in enumerate(rows, start=1):
        day = _to_date(row[feed.date_field], feed.date_format, index)
        if start <= day <= end:
            by_date[day] = {name: _to_float(row[feed.fields[name]], name, index) for name in expected}

    wanted = [start + dt.timedelta(days=i) for i in range((end - start).days + 1)]
    missing = [day for day in wanted if day not in by_date]
    if missing:
        raise PartialDataError(missing)

    if feed.kind == "candles":
        candles = []
        for index, day in enumerate(wanted, start=1):
            prices = [by_date[day][name] for name in CANDLE_FIELDS]
            if any(price is None for price in prices):
                raise MalformedRowError(f"Missing price for {day}", index)
            candles.append(Candle(day, *prices))
        return candles
    records = []
    for index, day in enumerate(wanted, start=1):
        values = dict(by_date[day])
        for name in ACTIVITY_FIELDS:
            if name not in LEVERAGE_FIELDS and values.get(name) is None:
                raise MalformedRowError(f"Missing {name} value for {day}", index)
        records.append(ActivityRecord(date=day, **values))
    return ActivitySeries(tuple(records), feed.source)


def fetch_remote(
    feed: FeedConfig,
    start: dt.date,
    end: dt.date,
    cache_dir: Union[str, Path],
    session=None,
) -> Union[List[Candle], ActivitySeries]:
    """
    Fetch a date range from a remote feed, serving repeats from the cache.

    Args:
        feed: Endpoint description
        start: First day (inclusive)
        end: Last day (inclusive)
        cache_dir: Directory holding cached responses
        session: Object with a ``requests``-compatible ``get``; defaults to a new
            ``requests.Session``

    Returns:
        Candles or an ActivitySeries, shaped like the CSV parsers' output

    Raises:
        TransportError: Network failure or HTTP error status
        SchemaMappingError: Mapped fields not present in the payload
        PartialDataError: Requested days missing from the payload
    """
    if end < start:
        raise ValueError(f"end {end} precedes start {start}")
    if feed.kind not in FEED_KINDS:
        raise ValueError(f"Unknown feed kind {feed.kind!r}")

    path = _cache_file(Path(cache_dir), feed, start, end)
    if path.exists():
        logger.debug("cache hit %s", path)
        body = path.read_bytes()
    else:
        body = _download(feed, start, end, session or requests.Session())
        _store(path, body)
    return _map_payload(feed, body, start, end)


__all__ = ["FeedConfig", "fetch_remote"]
