import json
import random
from pathlib import Path
from typing import List, Optional

import pandas as pd
import pytest
from pydantic import ValidationError

from federated_best_arm.bounds import bound_report
from federated_best_arm.harness import (
    LONG_COLUMNS,
    METRICS,
    CellSpec,
    ExperimentSpec,
    aggregate,
    cell_seed,
    check_acceptance,
    emit,
    long_table,
    run_trials,
)
from federated_best_arm.instance import SYNTHETIC_GAUSSIAN, ProblemInstance
from federated_best_arm.results.trial import (
    TrialRecord,
    parse_declarations,
    read_records,
    write_records,
)
from federated_best_arm.schedule import EveryStep, Exponential, Periodic

EXPERIMENTS = Path(__file__).parent.parent / "experiments"


def make_record(
    schedule: str,
    total_cost: float,
    cost: float = 10.0,
    delta: float = 0.1,
    trial: int = 0,
    event_E: Optional[bool] = None,
    correct: bool = True,
) -> TrialRecord:
    return TrialRecord(
        instance="synthetic-gaussian",
        schedule=schedule,
        cost=cost,
        delta=delta,
        trial=trial,
        seed=0,
        stop_step=100,
        total_pulls=1200,
        comm_cost=total_cost - 1200,
        comm_round_count=7,
        total_cost=total_cost,
        hit_max_steps=False,
        event_E=event_E,
        local_declarations="1 2 3",
        global_declaration=4,
        correct=correct,
    )


@pytest.fixture(scope="module")
def easy_spec():
    return ExperimentSpec(
        instance="easy",
        cells=[
            CellSpec(schedule=EveryStep(), cost=0.0),
            CellSpec(schedule="exp:2", cost=5.0),  # type: ignore
        ],
        deltas=[0.1, 0.05],
        trials=3,
        seed=4,
    )


@pytest.fixture(scope="module")
def easy_records(easy_spec: ExperimentSpec, easy_instance: ProblemInstance):
    return run_trials(easy_spec, easy_instance, progress=False)


def test_experiment_files():
    for path in sorted(EXPERIMENTS.glob("*.yaml")):
        spec = ExperimentSpec.from_yaml(path)
        assert spec.cells, path
        assert len(spec.grid()) == len(spec.cells) * len(spec.deltas)

    spec = ExperimentSpec.from_yaml(EXPERIMENTS / "period_sweep.yaml")
    assert [str(c.schedule) for c in spec.cells][:2] == ["periodic:1", "periodic:10"]

    spec = ExperimentSpec.from_yaml(EXPERIMENTS / "synthetic_bernoulli.yaml")
    periodic = [(str(c.schedule), c.cost) for c in spec.cells if c.cost > 0][-3:]
    assert periodic == [("periodic:1", 10), ("periodic:5", 10), ("periodic:10", 10)]
    assert 0.1 in spec.deltas


def test_empty_grids():
    with pytest.raises(ValidationError, match="empty algorithm grid"):
        _ = ExperimentSpec(cells=[])

    with pytest.raises(ValidationError, match="empty delta grid"):
        _ = ExperimentSpec(cells=[CellSpec(schedule=EveryStep())], deltas=[])

    with pytest.raises(ValidationError):
        _ = CellSpec(schedule="weekly")  # type: ignore


def test_cell_seed():
    assert cell_seed(0, 1) == cell_seed(0, 1)
    assert len({cell_seed(0, i) for i in range(10)} | {cell_seed(1, 0)}) == 11


def test_records_are_ordered(
    easy_records: List[TrialRecord], easy_spec: ExperimentSpec
):
    assert len(easy_records) == 4 * 3
    grid = easy_spec.grid()
    for i, record in enumerate(easy_records):
        schedule, cost, delta = grid[i // 3]
        assert (record.schedule, record.cost, record.delta) == (
            str(schedule),
            cost,
            delta,
        )
        assert record.trial == i % 3
        assert record.seed == cell_seed(4, i // 3)
        assert record.event_E is not None
        assert len(parse_declarations(record.local_declarations)) == 2


def test_workers_do_not_change_records(
    easy_records: List[TrialRecord],
    easy_spec: ExperimentSpec,
    easy_instance: ProblemInstance,
):
    parallel = run_trials(easy_spec, easy_instance, workers=2, progress=False)
    assert parallel == easy_records


def test_records_round_trip(easy_records: List[TrialRecord], tmp_path: Path):
    path = tmp_path / TrialRecord.file_name
    write_records(easy_records, path)
    assert read_records(path) == easy_records

    missing = [make_record("exp:2", 1500.0, event_E=None)]
    write_records(missing, path)
    assert read_records(path) == missing


def test_aggregate(easy_records: List[TrialRecord]):
    aggregates = aggregate(easy_records)
    assert [a.cell for a in aggregates] == sorted(a.cell for a in aggregates)
    for a in aggregates:
        rs = [r for r in easy_records if r.cell == a.cell]
        assert a.trials == 3
        assert a.total_pulls_mean == pytest.approx(
            sum(r.total_pulls for r in rs) / 3
        )
        assert a.errors == sum(not r.correct for r in rs)
        assert not a.bounds_checked

    shuffled = list(easy_records)
    random.Random(0).shuffle(shuffled)
    assert aggregate(shuffled) == aggregates

    with pytest.raises(ValueError):
        _ = aggregate([])


def test_population_std():
    records = [
        make_record("exp:2", total_cost=t, trial=i)
        for i, t in enumerate([1300.0, 1500.0])
    ]
    (a,) = aggregate(records)
    assert a.total_cost_mean == 1400.0
    assert a.total_cost_std == 100.0


def test_violations_are_counted_on_event_E():
    report = bound_report(SYNTHETIC_GAUSSIAN, 0.1, 10.0)
    huge = 4 * report.t_total
    records = [
        make_record("exp:2", 1500.0, trial=0, event_E=True),
        make_record("exp:2", huge, trial=1, event_E=True),
        make_record("exp:2", huge, trial=2, event_E=False),
    ]
    (a,) = aggregate(records, [report])
    assert a.bounds_checked
    assert a.e_trials == 2
    assert a.event_E_rate == pytest.approx(2 / 3)
    assert a.total_violations == 1

    acceptance = check_acceptance(records, [report])
    assert acceptance.status == "fail"
    (doubling,) = acceptance.by_criterion("doubling-bound")
    assert doubling.status == "fail"
    assert doubling.measured["total_violations"] == 1
    assert acceptance.by_criterion("every-step-bound")[0].status == "not evaluated"


def test_error_gate():
    records = [
        make_record("every", 1200.0, cost=0.0, delta=0.01, trial=i, correct=i >= 6)
        for i in range(20)
    ]
    (outcome,) = check_acceptance(records, [], max_errors=5).by_criterion(
        "delta-pac"
    )
    assert outcome.status == "fail"
    assert outcome.measured == {"errors": 6, "trials": 20}
    (outcome,) = check_acceptance(records, [], max_errors=6).by_criterion(
        "delta-pac"
    )
    assert outcome.status == "pass"


def test_sweet_spot():
    report = bound_report(SYNTHETIC_GAUSSIAN, 0.1, 10.0)
    totals = [1e6, 2e5, 6e4, 5e4, 3e5, 2e6]
    records = [
        make_record(f"periodic:{10**p}", t) for p, t in enumerate(totals)
    ] + [make_record("exp:2", 5.5e4)]
    acceptance = check_acceptance(records, [report])
    (sweet_spot,) = acceptance.by_criterion("sweet-spot")
    assert sweet_spot.status == "pass", sweet_spot.detail
    assert sweet_spot.detail == "minimum at H=1000"
    assert 100 < sweet_spot.measured["h_star"] < 1000

    records[0] = make_record("periodic:1", 1e4)
    (sweet_spot,) = check_acceptance(records, [report]).by_criterion("sweet-spot")
    assert sweet_spot.status == "fail"


def test_unevaluated_criteria():
    acceptance = check_acceptance([make_record("exp:2", 1500.0)], [])
    assert acceptance.status == "pass"
    for criterion in ("every-step-bound", "cost-ratio", "comm-cost", "sweet-spot"):
        (outcome,) = acceptance.by_criterion(criterion)
        assert outcome.status == "not evaluated"


def test_emit(easy_records: List[TrialRecord], tmp_path: Path):
    aggregates = aggregate(easy_records)
    table = long_table(aggregates)
    assert list(table.columns) == LONG_COLUMNS
    assert len(table) == len(aggregates) * len(METRICS)

    csv_path = emit(aggregates, tmp_path, "csv")
    assert csv_path.name == "aggregates.csv"
    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == LONG_COLUMNS
    assert set(frame["metric"]) == set(METRICS)

    json_path = emit(aggregates, tmp_path, "json")
    rows = json.loads(json_path.read_text(encoding="utf-8"))
    assert len(rows) == len(table)
    assert set(rows[0]) == set(LONG_COLUMNS)


def test_acceptance_at_small_scale():
    spec = ExperimentSpec(
        instance="synthetic-gaussian",
        cells=[
            CellSpec(schedule=EveryStep(), cost=0.0),
            CellSpec(schedule=Exponential(), cost=10.0),
            CellSpec(schedule=Periodic(period=1), cost=10.0),
            CellSpec(schedule=Periodic(period=5), cost=10.0),
            CellSpec(schedule=Periodic(period=10), cost=10.0),
        ],
        deltas=[0.1],
        trials=4,
        seed=0,
    )
    records = run_trials(spec, progress=False)
    report = bound_report(SYNTHETIC_GAUSSIAN, 0.1, 10.0)
    acceptance = check_acceptance(records, [report])
    statuses = {o.criterion: o.status for o in acceptance.outcomes}
    assert acceptance.status == "pass", [
        o for o in acceptance.outcomes if o.status == "fail"
    ]
    assert statuses["delta-pac"] == "pass"
    assert statuses["every-step-bound"] == "pass"
    assert statuses["doubling-bound"] == "pass"
    assert statuses["cost-ratio"] == "pass"
    assert statuses["comm-cost"] == "pass"
    assert statuses["sweet-spot"] == "not evaluated"
