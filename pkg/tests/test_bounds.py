import math

import pytest

from federated_best_arm.bounds import (
    BOUND_CONSTANT,
    Scope,
    bound_report,
    critical_sample_size,
    critical_sample_size_lambertw,
    doubling_bounds,
    instance_budgets,
    lower_bound,
    lower_bound_terms,
    optimal_base,
    optimal_period,
    schedule_bound,
    scheme_bound_table,
    solve_base,
    t_k,
    t_km,
    t_total,
)
from federated_best_arm.engine import global_radius, local_radius
from federated_best_arm.instance import SYNTHETIC_BERNOULLI, SYNTHETIC_GAUSSIAN
from federated_best_arm.schedule import (
    EveryStep,
    Exponential,
    Periodic,
    SuperExponential,
)


def test_budgets():
    assert t_km(0.8, 4, 3, 0.01) == pytest.approx(1465.6, abs=0.2)
    assert t_k(0.4 / 3, 4, 3, 0.01) == pytest.approx(21278.6, rel=1e-4)


def test_budget_with_unit_log():
    # 64·√(8KM/δ)/Δ² = e
    gap2 = 64 * math.sqrt(32) / math.e
    assert t_km(math.sqrt(gap2), 2, 1, 0.5) == pytest.approx(BOUND_CONSTANT / gap2 + 1)


@pytest.mark.parametrize("gap,delta", [(0.0, 0.1), (-0.2, 0.1), (0.3, 0.0), (0.3, 1.0)])
def test_budget_errors(gap: float, delta: float):
    with pytest.raises(ValueError):
        _ = t_km(gap, 2, 2, delta)

    with pytest.raises(ValueError):
        _ = t_k(gap, 2, 2, delta)


def test_t_total():
    budgets = instance_budgets(SYNTHETIC_GAUSSIAN, 0.01)
    # every arm shares the global gap 0.4/3, whose budget dominates
    assert all(tk == pytest.approx(21278.6, rel=1e-4) for tk in budgets.t_k)
    assert all(row[m] < budgets.t_k[0] for row in budgets.t_km for m in range(3))
    assert t_total(SYNTHETIC_GAUSSIAN, 0.01) == pytest.approx(
        12 * budgets.t_k[0], rel=1e-12
    )
    assert budgets.t_total == pytest.approx(2.553e5, rel=1e-3)


def test_doubling_bounds():
    budgets = instance_budgets(SYNTHETIC_GAUSSIAN, 0.01)
    bounds = doubling_bounds(SYNTHETIC_GAUSSIAN, 0.01, 10.0)
    assert bounds.pull_bound == pytest.approx(12 * 2 * budgets.t_k[0])
    # 2^14 < T_k < 2^15
    assert bounds.comm_bound == pytest.approx(10.0 * 3 * 4 * 15)
    assert bounds.total_bound == pytest.approx(3 * budgets.t_total)
    assert bounds.precondition_ok
    assert not doubling_bounds(SYNTHETIC_GAUSSIAN, 0.01, 1e5).precondition_ok


def test_lower_bound():
    terms = lower_bound_terms(SYNTHETIC_GAUSSIAN, 0.01)
    assert terms[3][0] == pytest.approx(46.62, abs=0.01)
    assert lower_bound(SYNTHETIC_GAUSSIAN, 0.01) == pytest.approx(
        2 * lower_bound(SYNTHETIC_GAUSSIAN, 0.01, statement_version=True)
    )
    assert lower_bound(SYNTHETIC_GAUSSIAN, 0.01) < t_total(SYNTHETIC_GAUSSIAN, 0.01)
    with pytest.raises(ValueError):
        _ = lower_bound(SYNTHETIC_GAUSSIAN, 0.5)


def test_critical_sample_size():
    n = critical_sample_size(0.8, 4, 3, 0.01, "local")
    assert n == 1165
    assert local_radius(n, 4, 3, 0.01) <= 0.2
    assert local_radius(n - 1, 4, 3, 0.01) > 0.2


@pytest.mark.parametrize("scope", ["local", "global"])
@pytest.mark.parametrize("gap", [2.0, 0.8, 0.3, 0.05])
@pytest.mark.parametrize("delta", [0.2, 0.01])
def test_critical_sample_size_closed_form(scope: Scope, gap: float, delta: float):
    n = critical_sample_size(gap, 4, 3, delta, scope)
    assert n == critical_sample_size_lambertw(gap, 4, 3, delta, scope)
    radius = local_radius if scope == "local" else global_radius
    assert all(radius(m, 4, 3, delta) <= gap / 4 for m in range(n, n + 200))


@pytest.mark.parametrize("gap", [0.05, 0.1, 0.2, 0.4, 0.8])
@pytest.mark.parametrize("delta", [0.1, 0.01])
def test_critical_sample_size_is_minimal_and_within_budget(gap: float, delta: float):
    n = critical_sample_size(gap, 4, 3, delta, "local")
    assert local_radius(n, 4, 3, delta) <= gap / 4 < local_radius(n - 1, 4, 3, delta)
    assert n <= math.ceil(t_km(gap, 4, 3, delta))

    n = critical_sample_size(gap, 4, 3, delta, "global")
    assert global_radius(n, 4, 3, delta) <= gap / 4 < global_radius(n - 1, 4, 3, delta)
    assert n <= math.ceil(t_k(gap, 4, 3, delta))


def test_large_gap_needs_a_single_sample():
    assert critical_sample_size(100.0, 2, 1, 0.1, "local") == 1
    assert critical_sample_size_lambertw(100.0, 2, 1, 0.1, "local") == 1


def test_optimal_period():
    assert optimal_period(10, 1e5, 3, 4) == pytest.approx(288.675, abs=1e-3)
    assert optimal_period(0, 1e5, 3, 4) == 1.0
    with pytest.raises(ValueError):
        _ = optimal_period(-1, 1e5, 3, 4)


def test_solve_base():
    assert solve_base(2 * math.log(2) ** 2) == pytest.approx(2.0, abs=1e-9)
    lam = solve_base(1.0)
    assert lam == pytest.approx(2.0205, abs=1e-3)
    assert lam * math.log(lam) ** 2 == pytest.approx(1.0, abs=1e-9)
    assert solve_base(0.0) == 1.0
    big = solve_base(1e4)
    assert big * math.log(big) ** 2 == pytest.approx(1e4, rel=1e-9)


def test_optimal_base():
    budgets = instance_budgets(SYNTHETIC_GAUSSIAN, 0.01)
    assert optimal_base(0.0, 3, budgets.t_total, budgets.t_k) == 1.0
    cheap = optimal_base(1.0, 3, budgets.t_total, budgets.t_k)
    expensive = optimal_base(1000.0, 3, budgets.t_total, budgets.t_k)
    assert 1.0 < cheap < expensive


def test_scheme_bound_table():
    budgets = instance_budgets(SYNTHETIC_GAUSSIAN, 0.01)
    t = budgets.t_total
    periodic, exponential, super_exponential = scheme_bound_table(
        SYNTHETIC_GAUSSIAN, 0.01, cost=10.0, period=1
    )
    assert periodic.scheme == "periodic:1"
    assert periodic.comm_bound == pytest.approx(10.0 * t + 10.0 * 3 * 4)
    assert periodic.pull_bound == pytest.approx(t + 3 * 4)
    assert exponential.scheme == "exp:2"
    assert exponential.pull_bound == pytest.approx(2 * t)
    assert super_exponential.scheme == "superexp"
    # ⌈log2 log2 T_k⌉ = 4 rounds per arm
    assert super_exponential.comm_bound == pytest.approx(10.0 * 3 * 4 * 4)
    for s in (periodic, exponential, super_exponential):
        assert s.total_bound == pytest.approx(s.pull_bound + s.comm_bound)

    # base 2 reproduces the doubling bound up to the ceiling slack
    doubling = doubling_bounds(SYNTHETIC_GAUSSIAN, 0.01, 10.0)
    assert exponential.comm_bound <= doubling.comm_bound + 10.0 * 3 * 4


def test_bound_report():
    report = bound_report(SYNTHETIC_GAUSSIAN, 0.01, 10.0)
    assert report.instance == "synthetic-gaussian"
    assert (report.num_arms, report.num_clients) == (4, 3)
    assert report.h_star == pytest.approx(optimal_period(10.0, report.t_total, 3, 4))
    assert report.schemes[0].scheme == f"periodic:{round(report.h_star)}"
    assert report.lambda_star > 1
    assert report.critical_local[1][0] == critical_sample_size(
        0.8, 4, 3, 0.01, "local"
    )
    assert len(report.critical_global) == 4
    assert report.lower_bound > report.lower_bound_statement > 0
    again = type(report).model_validate_json(report.model_dump_json())
    assert again == report


def test_bound_report_without_lower_bound():
    report = bound_report(SYNTHETIC_BERNOULLI, 0.5, 1.0, period=3)
    assert report.lower_bound == 0.0
    assert report.schemes[0].scheme == "periodic:3"


def test_schedule_bound():
    report = bound_report(SYNTHETIC_GAUSSIAN, 0.01, 10.0)
    t_ks = report.t_k

    every = schedule_bound(report, EveryStep(), 0.0)
    assert every.pull_bound == pytest.approx(report.t_total)
    assert every.comm_bound == 0.0

    doubling = schedule_bound(report, Exponential(), 10.0)
    assert doubling.pull_bound == pytest.approx(report.doubling.pull_bound)
    assert doubling.comm_bound == pytest.approx(report.doubling.comm_bound)
    assert doubling.total_bound == pytest.approx(report.doubling.total_bound)

    # the first communication at or after T_k ends every arm
    periodic = schedule_bound(report, Periodic(period=1000), 10.0)
    last = math.ceil(t_ks[0] / 1000) * 1000 + 1
    assert periodic.pull_bound == pytest.approx(12 * last)
    assert periodic.comm_bound == pytest.approx(10.0 * 3 * 4 * (last // 1000 + 1))

    shifted = schedule_bound(report, Periodic(period=1000, offset=1000), 10.0)
    assert shifted.pull_bound == pytest.approx(12 * math.ceil(t_ks[0] / 1000) * 1000)

    super_exponential = schedule_bound(report, SuperExponential(), 10.0)
    assert super_exponential.pull_bound == pytest.approx(12 * t_ks[0] ** 2)
    assert super_exponential.total_bound > doubling.total_bound
