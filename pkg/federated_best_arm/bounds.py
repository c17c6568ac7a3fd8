"""closed-form pull, communication and total cost bounds of an instance"""

from __future__ import annotations

import math
from typing import List, Literal, Optional, Sequence

from loguru import logger
from pydantic import Field
from scipy.optimize import root_scalar
from scipy.special import lambertw

from .common import FloatMatrix, Node
from .engine import global_radius, local_radius
from .instance import ProblemInstance, compute_gaps
from .schedule import EveryStep, Exponential, Periodic, Schedule, SuperExponential

SMALLEST_GAP = 1e-6
MAX_SAMPLE_SIZE = 2**62
BOUND_CONSTANT = 102
"""⌈64e/(e-1)⌉"""

Scope = Literal["local", "global"]


def _check_gap(gap: float) -> None:
    if not gap > 0:
        raise ValueError(f"gap must be positive, got {gap}")

    if gap < SMALLEST_GAP:
        logger.warning(
            "gap {} is below {}; bounds are ill-conditioned", gap, SMALLEST_GAP
        )


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def t_km(gap: float, K: int, M: int, delta: float) -> float:
    """pull budget of a local (arm, client) pair with local gap `gap`"""
    _check_gap(gap)
    _check_delta(delta)
    g2 = gap * gap
    return BOUND_CONSTANT * math.log(64 * math.sqrt(8 * K * M / delta) / g2) / g2 + 1


def t_k(gap: float, K: int, M: int, delta: float) -> float:
    """pull budget of an arm with global gap `gap`"""
    _check_gap(gap)
    _check_delta(delta)
    mg2 = M * gap * gap
    return BOUND_CONSTANT * math.log(64 * math.sqrt(8 * K / delta) / mg2) / mg2 + 1


class InstanceBudgets(Node, frozen=True):
    t_km: FloatMatrix
    t_k: Sequence[float]
    t_total: float


def instance_budgets(instance: ProblemInstance, delta: float) -> InstanceBudgets:
    K, M = instance.num_arms, instance.num_clients
    gaps = compute_gaps(instance)
    local = [[t_km(g, K, M, delta) for g in row] for row in gaps.local_gaps]
    glob = [t_k(g, K, M, delta) for g in gaps.global_gaps]
    total = sum(max(local[k][m], glob[k]) for k in range(K) for m in range(M))
    return InstanceBudgets(t_km=local, t_k=glob, t_total=total)


def t_total(instance: ProblemInstance, delta: float) -> float:
    """T = Σ_k Σ_m max{T_km, T_k}"""
    return instance_budgets(instance, delta).t_total


class DoublingBounds(Node, frozen=True):
    """bounds of exponentially sparse communication (base 2) on event E"""

    pull_bound: float
    comm_bound: float
    total_bound: float
    precondition_ok: bool
    """C ln T_k ≤ T_k for all k"""


def doubling_bounds_from_budgets(
    budgets: InstanceBudgets, M: int, cost: float
) -> DoublingBounds:
    pulls = sum(
        max(row[m], 2 * tk)
        for row, tk in zip(budgets.t_km, budgets.t_k)
        for m in range(M)
    )
    comm = cost * M * sum(math.ceil(math.log2(tk)) for tk in budgets.t_k)
    precondition_ok = all(cost * math.log(tk) <= tk for tk in budgets.t_k)
    if not precondition_ok:
        logger.warning("C ln T_k ≤ T_k violated for C={}", cost)

    return DoublingBounds(
        pull_bound=pulls,
        comm_bound=comm,
        total_bound=3 * budgets.t_total,
        precondition_ok=precondition_ok,
    )


def doubling_bounds(
    instance: ProblemInstance, delta: float, cost: float
) -> DoublingBounds:
    return doubling_bounds_from_budgets(
        instance_budgets(instance, delta), instance.num_clients, cost
    )


def lower_bound_terms(
    instance: ProblemInstance, delta: float, statement_version: bool = False
) -> List[List[float]]:
    """per (arm, client) terms of the lower bound on the total number of pulls"""
    if not 0 < delta < 1 / 2.4:
        raise ValueError(f"lower bound requires delta in (0, 1/2.4), got {delta}")

    M = instance.num_clients
    factor = 1 if statement_version else 2
    log_term = factor * math.log(1 / (2.4 * delta))
    gaps = compute_gaps(instance)
    return [
        [max(log_term / g**2, log_term / (M**2 * gk**2)) for g in row]
        for row, gk in zip(gaps.local_gaps, gaps.global_gaps)
    ]


def lower_bound(
    instance: ProblemInstance, delta: float, statement_version: bool = False
) -> float:
    """lower bound on the expected total number of pulls of any δ-PAC algorithm

    By default the form with the factor 2 in front of the log is used,
    `statement_version` drops that factor.
    """
    return sum(map(sum, lower_bound_terms(instance, delta, statement_version)))


def _radius(scope: Scope, n: int, K: int, M: int, delta: float, sigma: float) -> float:
    if scope == "local":
        return local_radius(n, K, M, delta, sigma)
    else:
        return global_radius(n, K, M, delta, sigma)


def critical_sample_size(
    gap: float, K: int, M: int, delta: float, scope: Scope, sigma: float = 1.0
) -> int:
    """smallest n with radius(n') ≤ gap/4 for every n' ≥ n

    The radius increases up to its maximizer e/√c (c = 8KM/δ resp. 8K/δ) and
    decreases beyond, so the search runs above the maximizer and then walks
    down through the (short) increasing part.
    """
    _check_gap(gap)
    target = gap / 4
    c = 8 * K * (M if scope == "local" else 1) / delta
    lo = max(1, math.ceil(math.e / math.sqrt(c)))

    def below(n: int) -> bool:
        return _radius(scope, n, K, M, delta, sigma) <= target

    hi = lo
    while not below(hi):
        hi *= 2
        if hi > MAX_SAMPLE_SIZE:
            raise OverflowError(f"critical sample size for gap {gap} exceeds 2^62")

    while lo < hi:
        mid = (lo + hi) // 2
        if below(mid):
            hi = mid
        else:
            lo = mid + 1

    n = lo
    while n > 1 and below(n - 1):
        n -= 1

    return n


def critical_sample_size_lambertw(
    gap: float, K: int, M: int, delta: float, scope: Scope, sigma: float = 1.0
) -> int:
    """closed form of `critical_sample_size` via the lower branch of Lambert W

    radius(n) ≤ gap/4 ⇔ a·n ≥ b + ln n with a = M_s·(gap/σ)²/64, b = ln(c)/2,
    whose largest root is n = -W₋₁(-a·e^(-b))/a.
    """
    _check_gap(gap)
    g = gap / sigma
    if scope == "local":
        a = g * g / 64
        c = 8 * K * M / delta
    else:
        a = M * g * g / 64
        c = 8 * K / delta

    b = math.log(c) / 2
    y = -a * math.exp(-b)
    if y < -1 / math.e:
        # the radius never exceeds gap/4
        return 1

    root = -lambertw(y, k=-1).real / a
    return max(1, math.ceil(root))


def optimal_period(cost: float, t: float, M: int, K: int) -> float:
    """period H* = √(C·T/(M·K)) minimizing the periodic total cost bound"""
    if cost < 0 or t <= 0:
        raise ValueError(f"need C ≥ 0 and T > 0, got C={cost}, T={t}")

    if cost == 0:
        logger.info("C=0: communicating every step (H*=1) is optimal")
        return 1.0

    return math.sqrt(cost * t / (M * K))


def solve_base(rhs: float) -> float:
    """unique λ > 1 with λ(ln λ)² = `rhs`"""
    if rhs < 0:
        raise ValueError(f"right-hand side must be non-negative, got {rhs}")

    if rhs == 0:
        return 1.0

    def f(lam: float) -> float:
        return lam * math.log(lam) ** 2 - rhs

    hi = 2.0
    while f(hi) < 0:
        hi *= 2

    solution = root_scalar(f, bracket=(1.0, hi), method="brentq", xtol=1e-12)
    return float(solution.root)


def optimal_base(cost: float, M: int, t: float, t_ks: Sequence[float]) -> float:
    """base λ* minimizing the exponential total cost bound

    Solves λ(ln λ)² = (C·M/T)·Σ_k ln T_k; C=0 yields the boundary value 1.
    """
    if cost < 0:
        raise ValueError(f"C must be non-negative, got {cost}")

    if any(tk <= 1 for tk in t_ks):
        raise ValueError("all T_k have to exceed 1")

    return solve_base(cost * M / t * sum(math.log(tk) for tk in t_ks))


class SchemeBound(Node, frozen=True):
    scheme: str
    pull_bound: float
    comm_bound: float
    total_bound: float


def _scheme(scheme: str, pulls: float, comm: float) -> SchemeBound:
    return SchemeBound(
        scheme=scheme, pull_bound=pulls, comm_bound=comm, total_bound=pulls + comm
    )


def scheme_bounds_from_budgets(
    budgets: InstanceBudgets,
    K: int,
    M: int,
    cost: float,
    period: int,
    base: float = 2.0,
) -> List[SchemeBound]:
    """worst-case bounds of the periodic, exponential and super-exponential schemes"""
    t = budgets.t_total
    periodic = _scheme(
        str(Periodic(period=period)),
        t + period * M * K,
        cost * t / period + cost * M * K,
    )
    exponential = _scheme(
        str(Exponential(base=base)),
        base * t,
        cost * M * sum(math.log(tk) / math.log(base) for tk in budgets.t_k)
        + cost * M * K,
    )
    super_exponential = _scheme(
        str(SuperExponential()),
        # steps at most square between consecutive communications
        sum(
            max(row[m], tk**2)
            for row, tk in zip(budgets.t_km, budgets.t_k)
            for m in range(M)
        ),
        cost * M * sum(_super_exponential_rounds(tk) for tk in budgets.t_k),
    )
    return [periodic, exponential, super_exponential]


def _super_exponential_rounds(tk: float) -> int:
    return max(0, math.ceil(math.log2(math.log2(tk)))) if tk > 2 else 0


def scheme_bound_table(
    instance: ProblemInstance,
    delta: float,
    cost: float,
    period: int,
    base: float = 2.0,
) -> List[SchemeBound]:
    return scheme_bounds_from_budgets(
        instance_budgets(instance, delta),
        instance.num_arms,
        instance.num_clients,
        cost,
        period,
        base,
    )


class BoundReport(Node, frozen=True):
    instance: str
    delta: float
    cost: float
    num_arms: int
    num_clients: int
    t_km: FloatMatrix
    t_k: Sequence[float]
    t_total: float
    doubling: DoublingBounds
    lower_bound: float
    lower_bound_statement: float
    h_star: float
    lambda_star: float
    critical_local: Sequence[Sequence[int]]
    critical_global: Sequence[int]
    schemes: Sequence[SchemeBound] = Field(default_factory=list)

    @property
    def budgets(self) -> InstanceBudgets:
        return InstanceBudgets(t_km=self.t_km, t_k=self.t_k, t_total=self.t_total)


def bound_report(
    instance: ProblemInstance,
    delta: float,
    cost: float,
    period: Optional[int] = None,
    base: float = 2.0,
) -> BoundReport:
    """all bound quantities of `instance` at confidence `delta` and uplink cost `cost`

    `period` defaults to the rounded optimal period.
    """
    K, M = instance.num_arms, instance.num_clients
    budgets = instance_budgets(instance, delta)
    gaps = compute_gaps(instance)
    h_star = optimal_period(cost, budgets.t_total, M, K)
    if period is None:
        period = max(1, round(h_star))

    if delta < 1 / 2.4:
        lower = lower_bound(instance, delta)
        lower_statement = lower_bound(instance, delta, statement_version=True)
    else:
        lower = lower_statement = 0.0

    return BoundReport(
        instance=instance.name,
        delta=delta,
        cost=cost,
        num_arms=K,
        num_clients=M,
        t_km=budgets.t_km,
        t_k=budgets.t_k,
        t_total=budgets.t_total,
        doubling=doubling_bounds_from_budgets(budgets, M, cost),
        lower_bound=lower,
        lower_bound_statement=lower_statement,
        h_star=h_star,
        lambda_star=(
            optimal_base(cost, M, budgets.t_total, budgets.t_k)
            if all(tk > 1 for tk in budgets.t_k)
            else 1.0
        ),
        critical_local=[
            [critical_sample_size(g, K, M, delta, "local") for g in row]
            for row in gaps.local_gaps
        ],
        critical_global=[
            critical_sample_size(g, K, M, delta, "global") for g in gaps.global_gaps
        ],
        schemes=scheme_bounds_from_budgets(budgets, K, M, cost, period, base),
    )


class ScheduleBound(Node, frozen=True):
    """high-probability bounds of a single schedule on event E"""

    schedule: str
    pull_bound: float
    comm_bound: float
    total_bound: float


def schedule_bound(
    report: BoundReport, schedule: Schedule, cost: float
) -> ScheduleBound:
    """bounds used to count violations among trials on which event E held

    Exponential base 2 reproduces the doubling bounds (total bound 3T).
    """
    budgets = report.budgets
    M = report.num_clients
    t_kms, t_ks = budgets.t_km, budgets.t_k

    def pulls(horizon: Sequence[float]) -> float:
        return sum(
            max(row[m], h) for row, h in zip(t_kms, horizon) for m in range(M)
        )

    if isinstance(schedule, EveryStep):
        pull_bound = budgets.t_total
        comm_bound = cost * M * sum(math.ceil(tk) for tk in t_ks)
    elif isinstance(schedule, Exponential):
        lam = schedule.base
        pull_bound = pulls([lam * tk for tk in t_ks])
        comm_bound = cost * M * sum(
            math.ceil(math.log(tk) / math.log(lam)) for tk in t_ks
        )
    elif isinstance(schedule, Periodic):
        # first communication at or after T_k; ⌈T_k/H⌉·H for offset H
        last = [schedule.next_comm_step(math.ceil(tk) - 1) for tk in t_ks]
        pull_bound = pulls(last)
        comm_bound = cost * M * sum(schedule.count(s) for s in last)
    else:
        pull_bound = pulls([tk**2 for tk in t_ks])
        comm_bound = cost * M * sum(
            _super_exponential_rounds(tk) + 1 + int(schedule.include_first)
            for tk in t_ks
        )

    if isinstance(schedule, Exponential) and schedule.base == 2.0:
        total_bound = 3 * budgets.t_total
    else:
        total_bound = pull_bound + comm_bound

    return ScheduleBound(
        schedule=str(schedule),
        pull_bound=pull_bound,
        comm_bound=comm_bound,
        total_bound=total_bound,
    )
