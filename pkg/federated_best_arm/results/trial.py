from __future__ import annotations

from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from ..common import Node

CellKey = Tuple[str, str, float, float]
"""(instance, schedule, C, δ)"""


def format_declarations(declarations: Sequence[Optional[int]]) -> str:
    """space separated 1-based arms, '-' for a missing declaration"""
    return " ".join("-" if k is None else str(k) for k in declarations)


def parse_declarations(text: str) -> List[Optional[int]]:
    return [None if k == "-" else int(k) for k in text.split()]


class TrialRecord(Node, frozen=True):
    """one run of one experiment cell"""

    file_name: ClassVar[str] = "records.csv"

    instance: str
    schedule: str
    cost: float
    delta: float
    trial: int
    seed: int
    """stream seed of the cell"""

    stop_step: int
    total_pulls: int
    comm_cost: float
    comm_round_count: int
    total_cost: float
    hit_max_steps: bool
    event_E: Optional[bool]
    local_declarations: str
    global_declaration: Optional[int]
    correct: bool
    """all declarations equal the ground truth"""

    @property
    def cell(self) -> CellKey:
        return (self.instance, self.schedule, self.cost, self.delta)


class Aggregate(Node, frozen=True):
    """statistics of one cell; standard deviations use the population formula"""

    file_name: ClassVar[str] = "aggregates.csv"

    instance: str
    schedule: str
    cost: float
    delta: float
    trials: int
    total_pulls_mean: float
    total_pulls_std: float
    comm_cost_mean: float
    comm_cost_std: float
    total_cost_mean: float
    total_cost_std: float
    errors: int
    """number of trials with a wrong or missing declaration"""

    error_rate: float
    event_E_rate: float
    e_trials: int
    """number of trials on which event E held"""

    bounds_checked: bool
    """violations were counted against a bound report"""

    pull_violations: int
    comm_violations: int
    total_violations: int
    max_steps_hits: int

    @property
    def cell(self) -> CellKey:
        return (self.instance, self.schedule, self.cost, self.delta)

    @property
    def violations(self) -> int:
        return self.pull_violations + self.comm_violations + self.total_violations


def write_records(records: Sequence[TrialRecord], path: Union[Path, str]) -> None:
    # object dtype keeps optional integers from turning into floats
    frame = pd.DataFrame(
        [r.model_dump() for r in records],
        columns=list(TrialRecord.model_fields),
        dtype=object,
    )
    frame.to_csv(path, index=False, encoding="utf-8")


def read_records(path: Union[Path, str]) -> List[TrialRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)

    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    rows: List[Dict[str, Any]] = frame.to_dict("records")  # type: ignore
    return [
        TrialRecord.model_validate({k: None if v == "" else v for k, v in row.items()})
        for row in rows
    ]
