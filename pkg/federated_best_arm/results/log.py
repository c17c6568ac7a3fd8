from __future__ import annotations

from datetime import datetime
from pathlib import Path
from typing import Any, ClassVar, Optional, Sequence, Union

from loguru import logger
from pydantic import Field

from ..common import Node


class LogEntry(Node, frozen=True, extra="ignore"):
    message: str = ""
    """log message"""

    details: Any = None
    """log details"""

    timestamp: datetime = Field(default_factory=datetime.now)
    """creation of log entry"""


class Log(Node, frozen=True, extra="ignore"):
    """`<output folder>/log.json` records every action that wrote into the folder"""

    file_name: ClassVar[str] = "log.json"

    log_version: str = "0.1.0"
    entries: Sequence[LogEntry] = Field(default_factory=list)

    def get_updated(self, update: Log) -> Log:
        if update.log_version != self.log_version:
            return update

        return Log(
            log_version=update.log_version,
            entries=list(self.entries) + list(update.entries),
        )

    @classmethod
    def load(cls, folder: Union[Path, str]) -> Optional[Log]:
        path = Path(folder) / cls.file_name
        if not path.exists():
            return None

        return cls.model_validate_json(path.read_text(encoding="utf-8"))


def extend_log(folder: Union[Path, str], message: str, details: Any = None) -> Log:
    """append an entry to the run log of `folder`"""
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    update = Log(entries=[LogEntry(message=message, details=details)])
    current = Log.load(folder)
    log = update if current is None else current.get_updated(update)
    _ = (folder / Log.file_name).write_text(
        log.model_dump_json(indent=2), encoding="utf-8"
    )
    logger.info("{}: {}", folder / Log.file_name, message)
    return log
