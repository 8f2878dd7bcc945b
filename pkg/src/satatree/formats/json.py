"""
JSON run configurations, the form embedded in checkpoint headers. Keys are sorted on write so equal
configurations serialize to equal bytes.
"""

import json
from typing import IO, Any

from satatree.errors import ConfigError
from satatree.formats.base import BaseFormat


class JSONFormat(BaseFormat[None]):
    def read(self, data: IO) -> tuple[dict[str, Any], None]:
        try:
            loaded = json.load(data)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot parse JSON in {self.path}: {e}") from e

        if not isinstance(loaded, dict):
            raise ConfigError(f"{self.path}: expected a JSON object at the top level, got {type(loaded).__name__}")
        return loaded, None

    def write(self, data: dict[str, Any], template: None = None) -> bytes:
        return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("utf-8")


__all__ = ["JSONFormat"]
