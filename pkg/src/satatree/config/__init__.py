"""
Run configuration. Task defaults live next to this module as ``<task>.yaml``; a name without a
suffix resolves to one of those, anything else is read as a path. Command-line overrides use
dot notation, e.g. ``train.lr=0.0005`` or ``encoder.tag_mode=none``.
"""

import importlib.resources
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from satatree.config.schema import (
    DataConfig,
    EncoderConfig,
    HeadConfig,
    RunConfig,
    TrainConfig,
)
from satatree.errors import ConfigError
from satatree.formats import YAMLFormat, get_format, opaque_to_typed, parse_scalar

PACKAGED_TASKS = ("default", "toy", "sst2", "sst5", "mr", "subj", "trec", "snli")


def _read_source(name_or_path: str | Path) -> dict[str, Any]:
    path = Path(name_or_path)
    if not path.suffix and str(name_or_path) in PACKAGED_TASKS:
        resource = importlib.resources.files("satatree.config").joinpath(f"{name_or_path}.yaml")
        with resource.open("rb") as stream:
            opaque, _ = YAMLFormat(resource.name).read(stream)
        return dict(opaque)
    opaque, _ = get_format(path).load()
    return dict(opaque)


def apply_overrides(data: dict[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    for override in overrides:
        key, sep, raw = override.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override {override!r} is not of the form section.key=value")
        _set_nested(data, key.strip(), parse_scalar(raw))
    return data


def _set_nested(d: dict, key: str, value: Any) -> None:
    """Set a value in a nested dictionary using a dot-notation key."""

    parts = key.split(".")
    for part in parts[:-1]:
        d = d.setdefault(part, {})
    d[parts[-1]] = value


def load_config(name_or_path: str | Path = "default", overrides: Iterable[str] = ()) -> RunConfig:
    return opaque_to_typed(apply_overrides(_read_source(name_or_path), overrides), RunConfig)


__all__ = [
    "DataConfig",
    "EncoderConfig",
    "HeadConfig",
    "PACKAGED_TASKS",
    "RunConfig",
    "TrainConfig",
    "apply_overrides",
    "load_config",
]
