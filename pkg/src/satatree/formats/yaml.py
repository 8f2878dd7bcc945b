"""
YAML run configurations. Reading keeps the round-trip document so a configuration written back
(for example next to a checkpoint) retains the comments of the file it came from.
"""

from io import StringIO
from typing import IO, Any

from ruamel.yaml import YAML
from ruamel.yaml.comments import CommentedMap
from ruamel.yaml.error import YAMLError

from satatree.errors import ConfigError
from satatree.formats.base import BaseFormat


class YAMLFormat(BaseFormat[CommentedMap]):
    def read(self, data: IO) -> tuple[dict[str, Any], CommentedMap]:
        try:
            document = YAML(typ="rt").load(data)
        except YAMLError as e:
            raise ConfigError(f"cannot parse YAML in {self.path}: {e}") from e

        if document is None:
            document = CommentedMap()
        elif not isinstance(document, CommentedMap):
            raise ConfigError(f"{self.path}: expected a YAML mapping at the top level, got {type(document).__name__}")
        return document, document

    def write(self, data: dict[str, Any], template: CommentedMap | None = None) -> bytes:
        document = _overlay(template, data) if template is not None else data
        buffer = StringIO()
        yaml = YAML(typ="rt")
        yaml.default_flow_style = False
        yaml.dump(document, buffer)
        return buffer.getvalue().encode("utf-8")


def parse_scalar(text: str) -> Any:
    """Interpret a command-line override value the way YAML would (``0.5``, ``true``, ``null``)."""

    return YAML(typ="safe").load(text)


def _overlay(document: CommentedMap, values: dict[str, Any]) -> CommentedMap:
    """Write ``values`` into ``document`` in place, descending into sections both sides share."""

    for key, value in values.items():
        section = document.get(key)
        if isinstance(section, CommentedMap) and isinstance(value, dict):
            _overlay(section, value)
        else:
            document[key] = value
    return document


__all__ = ["YAMLFormat", "parse_scalar"]
