"""Monte-Carlo driver: experiment grids, trials, aggregation and acceptance checks"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Literal,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BeforeValidator, Field, model_validator
from scipy.stats import binom
from tqdm import tqdm
from typing_extensions import Annotated, Self

from ._settings import settings
from .bounds import BoundReport, optimal_period, schedule_bound
from .common import Node, load_yaml_mapping
from .engine import RunConfig, TraceLevel, run
from .instance import BestArmProfile, ProblemInstance, compute_best_arms, load_instance
from .results.acceptance import AcceptanceReport, CriterionOutcome
from .results.trial import Aggregate, CellKey, TrialRecord, format_declarations
from .schedule import EveryStep, Exponential, Periodic, Schedule, parse_schedule


def _coerce_schedule(value: Any) -> Any:
    return parse_schedule(value) if isinstance(value, str) else value


class CellSpec(Node, frozen=True):
    """one algorithm of the grid: a schedule and an uplink cost"""

    schedule: Annotated[Schedule, BeforeValidator(_coerce_schedule)]
    cost: float = Field(0.0, ge=0)


class ExperimentSpec(Node, frozen=True):
    """grid of (schedule, C) cells × confidence levels"""

    instance: str = "synthetic-gaussian"
    """builtin instance name, instance text file or ingested instance JSON"""

    cells: Sequence[CellSpec]
    deltas: Sequence[Annotated[float, Field(gt=0, lt=1)]] = settings.delta_grid
    trials: int = Field(settings.trials, ge=1)
    seed: int = Field(settings.seed, ge=0)
    max_steps: int = Field(settings.max_steps, ge=1)
    sigma: float = Field(settings.sigma, gt=0)
    trace_level: TraceLevel = settings.trace_level

    @model_validator(mode="after")
    def _check_grids(self) -> Self:
        if not self.cells:
            raise ValueError("empty algorithm grid")

        if not self.deltas:
            raise ValueError("empty delta grid")

        return self

    @classmethod
    def from_yaml(cls, path: Union[Path, str]) -> ExperimentSpec:
        return cls.model_validate(load_yaml_mapping(path))

    def grid(self) -> List[Tuple[Schedule, float, float]]:
        """(schedule, C, δ) of every cell in cell-index order"""
        return [(c.schedule, c.cost, d) for c in self.cells for d in self.deltas]


def cell_seed(master_seed: int, cell_index: int) -> int:
    """reward stream seed of a cell"""
    return int(np.random.SeedSequence([master_seed, cell_index]).generate_state(1)[0])


class _Task(NamedTuple):
    instance: ProblemInstance
    truth: BestArmProfile
    config: RunConfig
    trial: int


def _run_task(task: _Task) -> TrialRecord:
    result, _ = run(task.instance, task.config, task.trial)
    correct = (
        list(result.local_declarations) == list(task.truth.local_best)
        and result.global_declaration == task.truth.global_best
    )
    return TrialRecord(
        instance=task.instance.name,
        schedule=str(task.config.schedule),
        cost=task.config.cost,
        delta=task.config.delta,
        trial=task.trial,
        seed=task.config.seed,
        stop_step=result.stop_step,
        total_pulls=result.total_pulls,
        comm_cost=result.comm_cost,
        comm_round_count=result.comm_round_count,
        total_cost=result.total_cost,
        hit_max_steps=result.hit_max_steps,
        event_E=result.event_E_holds,
        local_declarations=format_declarations(result.local_declarations),
        global_declaration=result.global_declaration,
        correct=correct,
    )


def run_trials(
    spec: ExperimentSpec,
    instance: Optional[ProblemInstance] = None,
    workers: int = settings.workers,
    progress: bool = True,
) -> List[TrialRecord]:
    """run every trial of every cell; records are ordered by (cell, trial)"""
    if instance is None:
        instance = load_instance(spec.instance)

    truth = compute_best_arms(instance)
    tasks = [
        _Task(
            instance,
            truth,
            RunConfig(
                delta=delta,
                cost=cost,
                sigma=spec.sigma,
                schedule=schedule,
                max_steps=spec.max_steps,
                seed=cell_seed(spec.seed, cell_index),
                trace_level="none" if spec.trace_level == "none" else "events",
            ),
            trial,
        )
        for cell_index, (schedule, cost, delta) in enumerate(spec.grid())
        for trial in range(spec.trials)
    ]
    logger.info(
        "running {} trials of {} cells on '{}'",
        len(tasks),
        len(tasks) // spec.trials,
        instance.name,
    )
    with tqdm(total=len(tasks), disable=not progress, desc="trials") as pbar:
        if workers == 1:
            records: List[TrialRecord] = []
            for task in tasks:
                records.append(_run_task(task))
                _ = pbar.update()
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                records = []
                # `map` yields in submission order
                for record in executor.map(_run_task, tasks, chunksize=spec.trials):
                    records.append(record)
                    _ = pbar.update()

    exhausted = sum(r.hit_max_steps for r in records)
    if exhausted:
        logger.warning("{} trial(s) hit max_steps={}", exhausted, spec.max_steps)

    return records


def _mean_std(values: Iterable[float]) -> Tuple[float, float]:
    # sorted so that the result does not depend on record order
    array = np.sort(np.fromiter(values, dtype=np.float64))
    return float(array.mean()), float(array.std())


BoundLookup = Dict[Tuple[str, float], BoundReport]


def bound_lookup(bounds: Iterable[BoundReport]) -> BoundLookup:
    return {(b.instance, b.delta): b for b in bounds}


def aggregate(
    records: Sequence[TrialRecord], bounds: Iterable[BoundReport] = ()
) -> List[Aggregate]:
    """per-cell statistics, sorted by cell

    Bound violations are counted among the trials on which event E held, for
    cells whose (instance, δ) has a bound report.
    """
    if not records:
        raise ValueError("no records to aggregate")

    lookup = bound_lookup(bounds)
    cells: Dict[CellKey, List[TrialRecord]] = {}
    for r in records:
        cells.setdefault(r.cell, []).append(r)

    aggregates: List[Aggregate] = []
    for (instance, schedule, cost, delta), rs in sorted(cells.items()):
        pulls = _mean_std(r.total_pulls for r in rs)
        comm = _mean_std(r.comm_cost for r in rs)
        total = _mean_std(r.total_cost for r in rs)
        e_true = [r for r in rs if r.event_E]
        report = lookup.get((instance, delta))
        if report is None:
            violations = (0, 0, 0)
        else:
            bound = schedule_bound(report, parse_schedule(schedule), cost)
            violations = (
                sum(r.total_pulls > bound.pull_bound for r in e_true),
                sum(r.comm_cost > bound.comm_bound for r in e_true),
                sum(r.total_cost > bound.total_bound for r in e_true),
            )

        aggregates.append(
            Aggregate(
                instance=instance,
                schedule=schedule,
                cost=cost,
                delta=delta,
                trials=len(rs),
                total_pulls_mean=pulls[0],
                total_pulls_std=pulls[1],
                comm_cost_mean=comm[0],
                comm_cost_std=comm[1],
                total_cost_mean=total[0],
                total_cost_std=total[1],
                errors=sum(not r.correct for r in rs),
                error_rate=sum(not r.correct for r in rs) / len(rs),
                event_E_rate=len(e_true) / len(rs),
                e_trials=len(e_true),
                bounds_checked=report is not None,
                pull_violations=violations[0],
                comm_violations=violations[1],
                total_violations=violations[2],
                max_steps_hits=sum(r.hit_max_steps for r in rs),
            )
        )
        logger.debug("aggregated cell {}", aggregates[-1].cell)

    return aggregates


def _rate_std(rate: float) -> float:
    return math.sqrt(rate * (1 - rate))


METRICS: Dict[str, Callable[[Aggregate], Tuple[float, float]]] = {
    "total_pulls": lambda a: (a.total_pulls_mean, a.total_pulls_std),
    "comm_cost": lambda a: (a.comm_cost_mean, a.comm_cost_std),
    "total_cost": lambda a: (a.total_cost_mean, a.total_cost_std),
    "error_rate": lambda a: (a.error_rate, _rate_std(a.error_rate)),
    "event_E_rate": lambda a: (a.event_E_rate, _rate_std(a.event_E_rate)),
}

LONG_COLUMNS = ["schedule", "C", "delta", "metric", "mean", "std"]


def long_table(aggregates: Sequence[Aggregate]) -> pd.DataFrame:
    """one row per (cell, metric)"""
    rows = [
        (a.schedule, a.cost, a.delta, metric, *stats(a))
        for a in aggregates
        for metric, stats in METRICS.items()
    ]
    return pd.DataFrame(rows, columns=LONG_COLUMNS)


def emit(
    aggregates: Sequence[Aggregate],
    folder: Union[Path, str],
    format: Literal["csv", "json"] = "csv",
) -> Path:
    """write the long-format aggregate table to `folder`/aggregates.<format>"""
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    path = folder / f"aggregates.{format}"
    table = long_table(aggregates)
    if format == "csv":
        table.to_csv(path, index=False, encoding="utf-8")
    elif format == "json":
        _ = path.write_text(
            table.to_json(orient="records", indent=2, double_precision=15),
            encoding="utf-8",
        )
    else:
        raise ValueError(f"unknown format '{format}', expected 'csv' or 'json'")

    logger.info("wrote {} ({} rows)", path, len(table))
    return path


def _error_gate(trials: int, delta: float, max_errors: int) -> int:
    """largest accepted number of wrong declarations of a cell"""
    return max(max_errors, int(binom.ppf(0.99, trials, delta)))


def _is_base_two(schedule: Schedule) -> bool:
    return isinstance(schedule, Exponential) and schedule.base == 2.0


def _period(schedule: Schedule) -> Optional[int]:
    if isinstance(schedule, Periodic) and schedule.offset == 1:
        return schedule.period

    return None


def _scope(a: Aggregate) -> str:
    return f"{a.instance} {a.schedule} C={a.cost:g} delta={a.delta:g}"


def check_acceptance(
    records: Sequence[TrialRecord],
    bounds: Iterable[BoundReport],
    max_errors: int = settings.max_errors,
) -> AcceptanceReport:
    """evaluate the record-based acceptance criteria

    Criteria whose cells are missing are reported as 'not evaluated'.
    """
    bounds = list(bounds)
    lookup = bound_lookup(bounds)
    aggregates = aggregate(records, bounds)
    schedules = {a.schedule: parse_schedule(a.schedule) for a in aggregates}
    outcomes: List[CriterionOutcome] = []

    def not_evaluated(criterion: str, detail: str):
        outcomes.append(
            CriterionOutcome(criterion=criterion, status="not evaluated", detail=detail)
        )

    for a in aggregates:
        gate = _error_gate(a.trials, a.delta, max_errors)
        outcomes.append(
            CriterionOutcome(
                criterion="delta-pac",
                scope=_scope(a),
                status="pass" if a.errors <= gate else "fail",
                detail=f"{a.errors} wrong declaration(s), at most {gate} accepted",
                measured={"errors": a.errors, "trials": a.trials},
            )
        )

    for criterion, selected, kinds in (
        (
            "every-step-bound",
            [a for a in aggregates if isinstance(schedules[a.schedule], EveryStep)],
            ("pull",),
        ),
        (
            "doubling-bound",
            [a for a in aggregates if _is_base_two(schedules[a.schedule])],
            ("pull", "comm", "total"),
        ),
    ):
        if not selected:
            not_evaluated(criterion, "no matching cells")

        for a in selected:
            if not a.bounds_checked:
                not_evaluated(criterion, f"no bound report for {_scope(a)}")
                continue

            counts = {
                "pull": a.pull_violations,
                "comm": a.comm_violations,
                "total": a.total_violations,
            }
            measured = {f"{k}_violations": counts[k] for k in kinds}
            outcomes.append(
                CriterionOutcome(
                    criterion=criterion,
                    scope=_scope(a),
                    status="pass" if not any(measured.values()) else "fail",
                    detail=f"{a.e_trials} trial(s) with event E checked",
                    measured=measured,
                )
            )

    by_group: Dict[Tuple[str, float], List[Aggregate]] = {}
    for a in aggregates:
        by_group.setdefault((a.instance, a.delta), []).append(a)

    # total cost of base-2 exponential communication vs pulls of communicating always
    ratio_evaluated = False
    for (instance, delta), group in by_group.items():
        every = [a for a in group if isinstance(schedules[a.schedule], EveryStep)]
        exponential = [a for a in group if _is_base_two(schedules[a.schedule])]
        if not every or not exponential:
            continue

        ratio_evaluated = True
        reference = every[0].total_pulls_mean
        ratios = {f"C={a.cost:g}": a.total_cost_mean / reference for a in exponential}
        outcomes.append(
            CriterionOutcome(
                criterion="cost-ratio",
                scope=f"{instance} delta={delta:g}",
                status="pass" if max(ratios.values()) <= 3 else "fail",
                detail="total cost relative to the pulls of communicating every step",
                measured=ratios,
            )
        )

    if not ratio_evaluated:
        not_evaluated("cost-ratio", "requires 'every' and 'exp:2' cells at equal delta")

    by_cost: Dict[Tuple[str, float, float], Dict[str, Aggregate]] = {}
    for a in aggregates:
        by_cost.setdefault((a.instance, a.delta, a.cost), {})[a.schedule] = a

    comm_evaluated = sweet_spot_evaluated = False
    for (instance, delta, cost), group in by_cost.items():
        exponential = next(
            (a for s, a in group.items() if _is_base_two(schedules[s])), None
        )
        periodic = {
            p: a for s, a in group.items() if (p := _period(schedules[s])) is not None
        }
        scope = f"{instance} C={cost:g} delta={delta:g}"

        compared = {h: periodic[h] for h in (1, 5, 10) if h in periodic}
        if exponential is not None and compared and cost > 0:
            comm_evaluated = True
            exp_comm = exponential.comm_cost_mean
            ok = all(exp_comm < a.comm_cost_mean for a in compared.values())
            if 1 in compared:
                ok = ok and compared[1].comm_cost_mean >= 5 * exp_comm

            outcomes.append(
                CriterionOutcome(
                    criterion="comm-cost",
                    scope=scope,
                    status="pass" if ok else "fail",
                    detail="exponential vs periodic mean communication cost",
                    measured={
                        "exp": exp_comm,
                        **{
                            f"periodic:{h}": a.comm_cost_mean
                            for h, a in compared.items()
                        },
                    },
                )
            )

        decades = [10**p for p in range(6)]
        if not all(h in periodic for h in decades):
            continue

        sweet_spot_evaluated = True
        totals = [periodic[h].total_cost_mean for h in decades]
        best = int(np.argmin(totals))
        measured: Dict[str, Any] = {f"periodic:{h}": t for h, t in zip(decades, totals)}
        ok = 0 < best < len(decades) - 1
        details = [f"minimum at H={decades[best]}"]
        if exponential is not None:
            measured["exp"] = exponential.total_cost_mean
            ok = ok and exponential.total_cost_mean <= 1.5 * totals[best]
        else:
            details.append("no 'exp:2' cell")

        report = lookup.get((instance, delta))
        if report is not None:
            h_star = optimal_period(
                cost, report.t_total, report.num_clients, report.num_arms
            )
            measured["h_star"] = h_star
            ok = ok and abs(math.log10(decades[best]) - math.log10(h_star)) <= 1
        else:
            details.append("no bound report, H* not compared")

        outcomes.append(
            CriterionOutcome(
                criterion="sweet-spot",
                scope=scope,
                status="pass" if ok else "fail",
                detail="; ".join(details),
                measured=measured,
            )
        )

    if not comm_evaluated:
        not_evaluated(
            "comm-cost", "requires 'exp:2' and 'periodic:<1|5|10>' cells with C > 0"
        )

    if not sweet_spot_evaluated:
        not_evaluated("sweet-spot", "requires 'periodic:<10^p>' cells for p = 0..5")

    report = AcceptanceReport(outcomes=outcomes)
    logger.info("acceptance: {}", report.status)
    return report
