"""Semantic analysis of parsed configuration files into typed configs."""

import dataclasses
import datetime as dt
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from ..agents.experiment import DEFAULT_POPULATION, ENGINE_KINDS, EngineSpec, ExperimentConfig
from ..agents.price_process import PriceProcess
from ..agents.traders import CLASS_IDS, TraderSpec
from ..errors import UsageError
from ..marketdata.records import SourceTag
from ..marketdata.remote import DATE_FORMATS, FEED_KINDS, FeedConfig
from .ast import ConfigDocument, EntryNode, SectionNode
from .parser import parse_config

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EXPERIMENT_KEYS = ("name", "days", "seed", "seeds", "start", "trading_steps_per_day", "vol_window")
FEED_KEYS = (
    "name",
    "kind",
    "url",
    "date_field",
    "date_format",
    "records_path",
    "auth_env",
    "auth_header",
    "source",
    "timeout",
)


class ConfigError(UsageError):
    """Exception raised when a well-formed configuration is not valid."""

    def __init__(self, message: str, line: Optional[int] = None):
        """
        Initialize a ConfigError.

        Args:
            message: Error message
            line: Line number where error occurred (1-indexed, optional)
        """
        self.message = message
        self.line = line
        if line is not None:
            super().__init__(f"Config error: {message} at line {line}")
        else:
            super().__init__(f"Config error: {message}")


def _type_name(kind) -> str:
    return getattr(kind, "__name__", str(kind))


def _coerce(entry: EntryNode, kind) -> Any:
    """Check ``entry.value`` against a field type and convert it."""
    value = entry.value
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is str:
        ok = isinstance(value, str)
    else:
        ok = False
    if not ok:
        raise ConfigError(f"{entry.key} must be {_type_name(kind)}, got {entry.value!r}", entry.line)
    return value


def _fields(section: SectionNode, spec_type, skip=()) -> Dict[str, Any]:
    """Keyword arguments for ``spec_type`` from a section's entries."""
    types = {f.name: f.type for f in dataclasses.fields(spec_type) if f.name not in skip}
    kwargs: Dict[str, Any] = {}
    for entry in section.entries:
        if entry.key not in types:
            raise ConfigError(f"Unknown key {entry.key!r} in [{section.name}]", entry.line)
        kwargs[entry.key] = _coerce(entry, types[entry.key])
    return kwargs


def _build(spec_type, section: SectionNode, *args, **kwargs):
    """Instantiate a spec, reporting validation failures at the section header."""
    try:
        return spec_type(*args, **kwargs)
    except ValueError as e:
        raise ConfigError(f"[{section.name}]: {e}", section.line) from None


class ConfigAnalyzer:
    """Validates a ConfigDocument and builds typed configs from it."""

    def __init__(self, document: ConfigDocument):
        """
        Initialize the analyzer with a parsed document.

        Args:
            document: The ConfigDocument to analyze
        """
        self.document = document
        self._check_duplicates()

    def _check_duplicates(self) -> None:
        seen = set()
        for section in self.document.sections:
            if section.name in seen:
                raise ConfigError(f"Section [{section.name}] appears twice", section.line)
            seen.add(section.name)
            keys = set()
            for entry in section.entries:
                if entry.key in keys:
                    raise ConfigError(f"Key {entry.key!r} set twice in [{section.name}]", entry.line)
                keys.add(entry.key)

    def _check_heads(self, allowed: Dict[str, bool]) -> None:
        """Reject sections whose head is unknown; ``allowed`` maps head to "needs a .sub name"."""
        for section in self.document.sections:
            if section.head not in allowed:
                raise ConfigError(f"Unknown section [{section.name}]", section.line)
            if allowed[section.head] != (section.tail is not None):
                form = f"[{section.head}.<name>]" if allowed[section.head] else f"[{section.head}]"
                raise ConfigError(f"Section [{section.name}] must be written {form}", section.line)

    # -- experiment ---------------------------------------------------------

    def experiment(self) -> ExperimentConfig:
        """
        Build an ExperimentConfig.

        Sections: ``[experiment]``, ``[price]``, ``[engine.<lob|oracle|vamm>]``
        and ``[traders.<class>]``. Without engine sections a single LOB engine
        runs; without trader sections the default population trades.

        Raises:
            ConfigError: Unknown section or key, wrong type, invalid value
        """
        self._check_heads({"experiment": False, "price": False, "engine": True, "traders": True})
        kwargs: Dict[str, Any] = {}
        section = self.document.section("experiment")
        if section is not None:
            kwargs.update(self._experiment_section(section))

        price = self.document.section("price")
        if price is not None:
            kwargs["price"] = _build(PriceProcess, price, **_fields(price, PriceProcess, skip=("seed",)))

        engines = [s for s in self.document.sections if s.head == "engine"]
        if engines:
            kwargs["engines"] = tuple(self._engine(s) for s in engines)
        traders = [s for s in self.document.sections if s.head == "traders"]
        kwargs["traders"] = tuple(self._traders(s) for s in traders) if traders else DEFAULT_POPULATION

        try:
            config = ExperimentConfig(**kwargs)
        except ValueError as e:
            raise ConfigError(str(e), section.line if section is not None else None) from None
        logger.debug("experiment config %s: %d engines, %d trader classes", config.name, len(config.engines),
                     len(config.traders))
        return config

    def _experiment_section(self, section: SectionNode) -> Dict[str, Any]:
        kwargs: Dict[str, Any] = {}
        for entry in section.entries:
            if entry.key not in EXPERIMENT_KEYS:
                raise ConfigError(f"Unknown key {entry.key!r} in [experiment]", entry.line)
            if entry.key == "start":
                try:
                    kwargs["start"] = dt.date.fromisoformat(_coerce(entry, str))
                except ValueError:
                    raise ConfigError(f"start must be an ISO date, got {entry.value!r}", entry.line) from None
            elif entry.key == "seeds":
                kwargs["seeds"] = self._seeds(entry)
            elif entry.key == "name":
                kwargs["name"] = _coerce(entry, str)
            else:
                kwargs[entry.key] = _coerce(entry, int)
        return kwargs

    @staticmethod
    def _seeds(entry: EntryNode) -> tuple:
        value = entry.value
        if isinstance(value, range):
            seeds = tuple(value)
        elif isinstance(value, list):
            seeds = tuple(value)
        else:
            seeds = (value,)
        if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            raise ConfigError(f"seeds must be integers or a range a..b, got {value!r}", entry.line)
        return seeds

    def _engine(self, section: SectionNode) -> EngineSpec:
        if section.tail not in ENGINE_KINDS:
            raise ConfigError(
                f"Unknown engine {section.tail!r} (expected one of: {', '.join(ENGINE_KINDS)})", section.line
            )
        return _build(EngineSpec, section, section.tail, **_fields(section, EngineSpec, skip=("kind",)))

    def _traders(self, section: SectionNode) -> TraderSpec:
        if section.tail not in CLASS_IDS:
            raise ConfigError(
                f"Unknown trader class {section.tail!r} (expected one of: {', '.join(CLASS_IDS)})", section.line
            )
        return _build(TraderSpec, section, section.tail, **_fields(section, TraderSpec, skip=("agent_class",)))

    # -- feed ---------------------------------------------------------------

    def feed(self) -> FeedConfig:
        """
        Build a FeedConfig.

        Sections: ``[feed]`` plus ``[feed.fields]`` (our field name to the
        remote record's field name) and optional ``[feed.params]`` (query
        parameters).

        Raises:
            ConfigError: Missing url or fields, unknown kind, date format or source
        """
        for other in self.document.sections:
            if other.name not in ("feed", "feed.fields", "feed.params"):
                raise ConfigError(f"Unknown section [{other.name}]", other.line)
        section = self.document.section("feed")
        if section is None:
            raise ConfigError("Missing [feed] section")
        kwargs: Dict[str, Any] = {}
        for entry in section.entries:
            if entry.key not in FEED_KEYS:
                raise ConfigError(f"Unknown key {entry.key!r} in [feed]", entry.line)
            kwargs[entry.key] = _coerce(entry, float if entry.key == "timeout" else str)

        for key in ("name", "kind", "url"):
            if key not in kwargs:
                raise ConfigError(f"[feed] needs a {key}", section.line)
        if kwargs["kind"] not in FEED_KINDS:
            raise ConfigError(f"Unknown feed kind {kwargs['kind']!r} (expected one of: {', '.join(FEED_KINDS)})",
                              section.get("kind").line)
        if kwargs.get("date_format", "iso") not in DATE_FORMATS:
            raise ConfigError(f"Unknown date format {kwargs['date_format']!r}", section.get("date_format").line)
        if "source" in kwargs:
            try:
                kwargs["source"] = SourceTag.parse(kwargs["source"])
            except ValueError as e:
                raise ConfigError(str(e), section.get("source").line) from None
        if "timeout" in kwargs and not kwargs["timeout"] > 0:
            raise ConfigError("timeout must be > 0", section.get("timeout").line)

        fields = self.document.section("feed.fields")
        if fields is None or not fields.entries:
            raise ConfigError("[feed.fields] must map at least one field", section.line)
        kwargs["fields"] = self._mapping(fields)
        params = self.document.section("feed.params")
        if params is not None:
            kwargs["params"] = self._mapping(params)
        return FeedConfig(**kwargs)

    @staticmethod
    def _mapping(section: SectionNode) -> Dict[str, str]:
        mapping = {}
        for entry in section.entries:
            value = entry.value
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise ConfigError(f"{entry.key} must be a single value, got {value!r}", entry.line)
            mapping[entry.key] = str(value)
        return mapping


def analyze_experiment(document: ConfigDocument) -> ExperimentConfig:
    return ConfigAnalyzer(document).experiment()


def analyze_feed(document: ConfigDocument) -> FeedConfig:
    return ConfigAnalyzer(document).feed()


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e.strerror or e}") from None


def load_experiment_config(path: PathLike) -> ExperimentConfig:
    """Read, parse and analyze an experiment config file."""
    return analyze_experiment(parse_config(_read(path)))


def load_feed_config(path: PathLike) -> FeedConfig:
    """Read, parse and analyze a feed config file."""
    return analyze_feed(parse_config(_read(path)))
