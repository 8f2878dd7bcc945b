from abc import ABC, abstractmethod
from pathlib import Path
from typing import IO, Any, Generic, TypeVar

from satatree.utils.files import atomic_write

T = TypeVar("T")


class BaseFormat(ABC, Generic[T]):
    """
    A configuration serialization. Subclasses turn a byte stream into a plain mapping (plus whatever
    layout object ``T`` they need to write it back faithfully) and the reverse.
    """

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)

    @abstractmethod
    def read(self, data: IO) -> tuple[dict[str, Any], T]:
        """
        Parse ``data`` into a mapping and a layout template.

        Raises:
            ValueError: The stream is not valid in this format, or its top level is not a mapping.
        """

        ...

    @abstractmethod
    def write(self, data: dict[str, Any], template: T | None = None) -> bytes:
        """Serialize ``data`` as UTF-8, laid out like ``template`` when one is given."""

        ...

    def load(self) -> tuple[dict[str, Any], T]:
        """Read the mapping stored at ``self.path``."""

        with open(self.path, "rb") as f:
            return self.read(f)

    def dump(self, data: dict[str, Any], template: T | None = None) -> None:
        """Replace ``self.path`` with ``data`` in one atomic step."""

        atomic_write(self.path, self.write(data, template))


__all__ = ["BaseFormat"]
