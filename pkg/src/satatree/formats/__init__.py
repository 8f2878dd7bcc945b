"""
Run configuration serializations. A format turns a file into a plain mapping; ``opaque_to_typed``
then validates that mapping against a Pydantic model, so the rest of the package only ever sees
typed configuration.

YAML is what people write by hand (and what the packaged task files use); JSON is what checkpoint
headers embed.
"""

from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from satatree.errors import ConfigError
from satatree.formats.base import BaseFormat
from satatree.formats.json import JSONFormat
from satatree.formats.yaml import YAMLFormat, parse_scalar

M = TypeVar("M", bound=BaseModel)

_BY_SUFFIX: dict[str, type[BaseFormat]] = {
    ".yaml": YAMLFormat,
    ".yml": YAMLFormat,
    ".json": JSONFormat,
}


def get_format(path: Path | str) -> BaseFormat:
    """The format for ``path``, chosen by suffix (case-insensitive)."""

    suffix = Path(path).suffix.lower()
    if suffix not in _BY_SUFFIX:
        raise ConfigError(f"unsupported configuration suffix {suffix!r}; expected one of {', '.join(_BY_SUFFIX)}")
    return _BY_SUFFIX[suffix](path)


def opaque_to_typed(data: dict, model: type[M]) -> M:
    """Validate ``data`` against ``model``; every failing field is named by its dotted path."""

    try:
        return model.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid {model.__name__}: {problems}") from e


__all__ = [
    "BaseFormat",
    "JSONFormat",
    "YAMLFormat",
    "get_format",
    "opaque_to_typed",
    "parse_scalar",
]
