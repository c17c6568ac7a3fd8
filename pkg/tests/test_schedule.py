from typing import List

import pytest

from federated_best_arm.schedule import (
    EveryStep,
    Exponential,
    Periodic,
    Schedule,
    SuperExponential,
    enumerate_steps,
    is_comm_step,
    next_comm_step,
    parse_schedule,
    schedule_adapter,
)

SCHEDULES: List[Schedule] = [
    EveryStep(),
    Exponential(),
    Exponential(base=1.5),
    Exponential(base=3.7),
    Periodic(period=1),
    Periodic(period=7),
    Periodic(period=5, offset=3),
    SuperExponential(),
    SuperExponential(include_first=False),
]


@pytest.mark.parametrize(
    "schedule,expected",
    [
        (EveryStep(), [1, 2, 3, 4, 5]),
        (Exponential(), [1, 2, 4, 8, 16]),
        (Exponential(base=1.5), [1, 2, 3, 4, 6, 8, 12, 18]),
        (Periodic(period=10), [1, 11]),
        (Periodic(period=5, offset=3), [3, 8, 13, 18]),
        (SuperExponential(), [1, 2, 4, 16]),
        (SuperExponential(include_first=False), [2, 4, 16]),
    ],
)
def test_enumerate(schedule: Schedule, expected: List[int]):
    horizon = 5 if isinstance(schedule, EveryStep) else 20
    assert enumerate_steps(schedule, horizon) == expected


def test_super_exponential_steps():
    assert SuperExponential().enumerate(70000) == [1, 2, 4, 16, 256, 65536]


@pytest.mark.parametrize("schedule", SCHEDULES, ids=str)
def test_consistency(schedule: Schedule):
    horizon = 300
    steps = enumerate_steps(schedule, horizon)
    assert steps == sorted(set(steps))
    assert all(1 <= s <= horizon for s in steps)
    assert [n for n in range(1, horizon + 1) if is_comm_step(schedule, n)] == steps
    assert schedule.count(horizon) == len(steps)
    for n in range(0, steps[-1]):
        assert next_comm_step(schedule, n) == min(s for s in steps if s > n)


def test_next_comm_step_beyond_horizon():
    assert Exponential().next_comm_step(1024) == 2048
    assert Periodic(period=5, offset=3).next_comm_step(0) == 3
    assert SuperExponential().next_comm_step(16) == 256
    assert SuperExponential(include_first=False).next_comm_step(0) == 2


def test_non_positive_steps():
    for schedule in SCHEDULES:
        assert not is_comm_step(schedule, 0)
        assert not is_comm_step(schedule, -3)


@pytest.mark.parametrize(
    "text",
    [
        "every",
        "exp:2",
        "exp:1.5",
        "periodic:10",
        "periodic:10:3",
        "superexp",
        "superexp:literal",
    ],
)
def test_parse_schedule(text: str):
    schedule = parse_schedule(text)
    assert str(schedule) == text
    assert parse_schedule(schedule) is schedule
    assert schedule_adapter.validate_python(schedule.model_dump()) == schedule


def test_parse_default_base():
    assert parse_schedule("exp") == Exponential(base=2.0)
    assert parse_schedule(" Periodic:4 ") == Periodic(period=4)


@pytest.mark.parametrize(
    "text",
    ["exp:1", "exp:x", "periodic:0", "periodic", "periodic:1:2:3", "every:3", "daily"],
)
def test_parse_schedule_errors(text: str):
    with pytest.raises(ValueError, match="invalid schedule"):
        _ = parse_schedule(text)
