"""
.. include:: ../README.md
"""

import json
from pathlib import Path

from ._workbench import Workbench
from .bounds import BoundReport, bound_report
from .engine import Engine, RunConfig, RunResult, run
from .harness import ExperimentSpec, check_acceptance, run_trials
from .instance import ProblemInstance, load_instance, validate
from .schedule import parse_schedule

__version__: str = json.loads(
    (Path(__file__).parent / "VERSION").read_text(encoding="utf-8")
)["version"]

__all__ = [
    "__version__",
    "bound_report",
    "BoundReport",
    "check_acceptance",
    "Engine",
    "ExperimentSpec",
    "load_instance",
    "parse_schedule",
    "ProblemInstance",
    "run_trials",
    "run",
    "RunConfig",
    "RunResult",
    "validate",
    "Workbench",
]
