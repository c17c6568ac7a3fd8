from __future__ import annotations

from typing import Any, ClassVar, Dict, Literal, Sequence

from pydantic import Field, computed_field

from ..common import Node

Status = Literal["pass", "fail", "not evaluated"]


class CriterionOutcome(Node, frozen=True):
    criterion: str
    scope: str = ""
    """instance and cell(s) the outcome refers to"""

    status: Status
    detail: str = ""
    measured: Dict[str, Any] = Field(default_factory=dict)


class AcceptanceReport(Node, frozen=True):
    """`<output folder>/acceptance.json`"""

    file_name: ClassVar[str] = "acceptance.json"

    outcomes: Sequence[CriterionOutcome] = Field(default_factory=list)

    @computed_field
    @property
    def status(self) -> Literal["pass", "fail"]:
        return "fail" if any(o.status == "fail" for o in self.outcomes) else "pass"

    def by_criterion(self, criterion: str) -> Sequence[CriterionOutcome]:
        return [o for o in self.outcomes if o.criterion == criterion]
