"""Write typed configs back in the configuration file format."""

import dataclasses
from typing import Any, Iterable, List, Tuple, Union

from ..agents.experiment import ExperimentConfig
from ..marketdata.remote import FeedConfig


def render_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, range):
        return f"{value.start}..{value.stop - 1}"
    if isinstance(value, (list, tuple)):
        return ", ".join(render_value(item) for item in value)
    text = str(getattr(value, "value", value))
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _section(name: str, entries: Iterable[Tuple[str, Any]]) -> List[str]:
    return [f"[{name}]"] + [f"{key} = {render_value(value)}" for key, value in entries] + [""]


def _spec_entries(spec, skip: str) -> List[Tuple[str, Any]]:
    return [(f.name, getattr(spec, f.name)) for f in dataclasses.fields(spec) if f.name != skip]


def _seeds(seeds: Tuple[int, ...]) -> Union[range, Tuple[int, ...]]:
    if len(seeds) > 1 and list(seeds) == list(range(seeds[0], seeds[-1] + 1)):
        return range(seeds[0], seeds[-1] + 1)
    return seeds


def render_config(config: Union[ExperimentConfig, FeedConfig]) -> str:
    """
    Render a config as file text that parses and analyzes back to an equal config.

    Every parameter is written out, defaults included.
    """
    lines: List[str] = []
    if isinstance(config, FeedConfig):
        entries = [
            (f.name, getattr(config, f.name))
            for f in dataclasses.fields(config)
            if f.name not in ("fields", "params") and getattr(config, f.name) is not None
        ]
        lines += _section("feed", entries)
        lines += _section("feed.fields", config.fields.items())
        if config.params:
            lines += _section("feed.params", config.params.items())
        return "\n".join(lines)

    experiment = [
        ("name", config.name),
        ("days", config.days),
        ("seed", config.seed),
        ("start", config.start.isoformat()),
        ("trading_steps_per_day", config.trading_steps_per_day),
        ("vol_window", config.vol_window),
    ]
    if config.seeds:
        experiment.insert(3, ("seeds", _seeds(config.seeds)))
    lines += _section("experiment", experiment)
    lines += _section("price", _spec_entries(config.price, "seed"))
    for engine in config.engines:
        lines += _section(f"engine.{engine.kind}", _spec_entries(engine, "kind"))
    for spec in config.traders:
        lines += _section(f"traders.{spec.agent_class}", _spec_entries(spec, "agent_class"))
    return "\n".join(lines)
