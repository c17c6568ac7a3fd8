from __future__ import annotations

from pathlib import Path
from typing import ClassVar, Sequence, Union

from pydantic import Field

from ..bounds import BoundReport
from ..common import Node


class BoundsFile(Node, frozen=True):
    """`<output folder>/bounds.json` holds one bound report per (instance, δ)"""

    file_name: ClassVar[str] = "bounds.json"

    reports: Sequence[BoundReport] = Field(default_factory=list)

    @classmethod
    def load(cls, path: Union[Path, str]) -> BoundsFile:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)

        return cls.model_validate_json(path.read_text(encoding="utf-8"))

    def save(self, folder: Union[Path, str]) -> Path:
        path = Path(folder) / self.file_name
        _ = path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path
