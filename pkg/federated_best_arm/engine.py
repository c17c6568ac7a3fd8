"""federated successive elimination as a deterministic state machine

Each step every client pulls all arms of S_m = S_l,m ∪ S_g once (if |S_m| > 1),
eliminates locally with the local confidence radius, and at communication
steps the server aggregates the client means of S_g and eliminates globally
with the global confidence radius.
A set reaching size 1 is declared and emptied in the same step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Dict,
    Iterable,
    List,
    Literal,
    NamedTuple,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import pandas as pd
from loguru import logger
from pydantic import Field

from ._settings import settings
from .common import IntMatrix, Node
from .instance import ProblemInstance, global_means
from .rewards import RewardSource, RewardStreams
from .schedule import Exponential, Schedule

TraceLevel = Literal["none", "events", "full"]
EventType = Literal[
    "pull", "local_elim", "global_elim", "comm_round", "declare_local", "declare_global"
]


def local_radius(n: int, K: int, M: int, delta: float, sigma: float = 1.0) -> float:
    """confidence radius of a client mean formed from `n` samples"""
    return sigma * math.sqrt(2 * math.log(8 * K * M * n * n / delta) / n)


def global_radius(n: int, K: int, M: int, delta: float, sigma: float = 1.0) -> float:
    """confidence radius of a server mean aggregated from M·`n` samples"""
    return sigma * math.sqrt(2 * math.log(8 * K * n * n / delta) / (M * n))


class RunConfig(Node, frozen=True):
    delta: float = Field(gt=0, lt=1)
    """confidence parameter δ"""

    cost: float = Field(0.0, ge=0)
    """uplink cost C per scalar sent by one client"""

    sigma: float = Field(settings.sigma, gt=0)
    schedule: Schedule = Exponential()
    max_steps: int = Field(settings.max_steps, ge=1)
    seed: int = Field(settings.seed, ge=0)
    trace_level: TraceLevel = settings.trace_level


class TraceEvent(NamedTuple):
    n: int
    event_type: EventType
    client: Optional[int]
    arm: Optional[int]
    value: Optional[float]


class StepRadii(NamedTuple):
    n: int
    alpha_l: float
    alpha_g: float


@dataclass
class Trace:
    """events of one run; `pull` events and per-step radii only at level 'full'"""

    level: TraceLevel
    delta: float
    sigma: float = 1.0
    events: List[TraceEvent] = field(default_factory=list)
    radii: List[StepRadii] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.events, columns=list(TraceEvent._fields))
        # nullable integers; server events carry no client
        return frame.astype({"client": "Int64", "arm": "Int64"})

    def to_csv(self, path: Union[Path, str]) -> None:
        self.to_frame().to_csv(path, index=False, encoding="utf-8")


@dataclass
class EngineState:
    n: int
    local_active: List[Set[int]]
    """S_l,m per client (0-based arm indices)"""

    global_active: Set[int]
    """S_g (0-based arm indices)"""

    sums: List[List[float]]
    counts: List[List[int]]
    local_declarations: List[Optional[int]]
    global_declaration: Optional[int] = None
    total_pulls: int = 0
    comm_units: int = 0
    """Σ over communication rounds of M·|S_g| (communication cost / C)"""

    comm_rounds: List[Tuple[int, int]] = field(default_factory=list)
    """(step, |S_g| at send time) of every communication round"""

    e_holds: bool = True
    """event E has not been observed to fail so far"""

    @classmethod
    def initial(cls, num_arms: int, num_clients: int) -> EngineState:
        return cls(
            n=0,
            local_active=[set(range(num_arms)) for _ in range(num_clients)],
            global_active=set(range(num_arms)),
            sums=[[0.0] * num_clients for _ in range(num_arms)],
            counts=[[0] * num_clients for _ in range(num_arms)],
            local_declarations=[None] * num_clients,
        )

    @property
    def terminated(self) -> bool:
        return not self.global_active and not any(self.local_active)


class Snapshot(NamedTuple):
    """comparable view of the engine state after a step (1-based arms)"""

    n: int
    local_active: Tuple[Tuple[int, ...], ...]
    global_active: Tuple[int, ...]
    local_declarations: Tuple[Optional[int], ...]
    global_declaration: Optional[int]
    total_pulls: int
    comm_units: int


def leader(means: Dict[int, float]) -> int:
    """arm with the largest empirical mean; the lowest index wins ties"""
    return min(means, key=lambda k: (-means[k], k))


class CommRound(Node, frozen=True):
    step: int
    active: int
    """|S_g| at send time"""


class RunResult(Node, frozen=True):
    local_declarations: Sequence[Optional[int]]
    """1-based declared local best arm per client (None if never declared)"""

    global_declaration: Optional[int]
    stop_step: int
    total_pulls: int
    pull_counts: IntMatrix
    cost: float
    """uplink cost C of the run"""

    comm_cost: float
    comm_round_count: int
    comm_rounds: Sequence[CommRound]
    total_cost: float
    event_E_holds: Optional[bool]
    """None if the run was not instrumented (trace level 'none')"""

    hit_max_steps: bool


class CostBreakdown(NamedTuple):
    total_pulls: int
    comm_cost: float
    total_cost: float


def cost_of(result: RunResult) -> CostBreakdown:
    return CostBreakdown(result.total_pulls, result.comm_cost, result.total_cost)


class Engine:
    """single-owner runner of one trial

    Args:
        instance: the problem instance (ground truth for event E checks)
        config: run parameters
        trial: trial index keying the reward streams
        rewards: reward source, defaults to seeded streams of `instance`
    """

    def __init__(
        self,
        instance: ProblemInstance,
        config: RunConfig,
        trial: int = 0,
        rewards: Optional[RewardSource] = None,
    ) -> None:
        super().__init__()
        self.instance = instance
        self.config = config
        self.trial = trial
        self.rewards: RewardSource = (
            RewardStreams(instance, config.seed, trial) if rewards is None else rewards
        )
        self.state = EngineState.initial(instance.num_arms, instance.num_clients)
        self.trace: Optional[Trace] = (
            None
            if config.trace_level == "none"
            else Trace(config.trace_level, config.delta, config.sigma)
        )
        self._global_means = global_means(instance)

    def _record(
        self,
        event_type: EventType,
        client: Optional[int] = None,
        arm: Optional[int] = None,
        value: Optional[float] = None,
    ):
        if self.trace is not None:
            self.trace.events.append(
                TraceEvent(self.state.n, event_type, client, arm, value)
            )

    def step(self) -> EngineState:
        """advance the machine by one step"""
        s = self.state
        if s.terminated:
            raise RuntimeError("cannot step a terminated run")

        s.n += 1
        n = s.n
        K, M = self.instance.num_arms, self.instance.num_clients
        delta, sigma = self.config.delta, self.config.sigma
        alpha_l = local_radius(n, K, M, delta, sigma)
        alpha_g = global_radius(n, K, M, delta, sigma)
        trace = self.trace
        instrumented = trace is not None
        full = trace is not None and trace.level == "full"
        if trace is not None and full:
            trace.radii.append(StepRadii(n, alpha_l, alpha_g))

        for m in range(M):
            active = s.local_active[m]
            pulled = sorted(active | s.global_active)
            if len(pulled) > 1:
                for k in pulled:
                    reward = self.rewards.draw(k + 1, m + 1)
                    s.sums[k][m] += reward
                    s.counts[k][m] += 1
                    if full:
                        self._record("pull", m + 1, k + 1, reward)

                    if instrumented:
                        assert s.counts[k][m] == n
                        deviation = s.sums[k][m] / n - self.instance.means[k][m]
                        if abs(deviation) > alpha_l:
                            s.e_holds = False

                s.total_pulls += len(pulled)

            if len(active) > 1:
                means = {k: s.sums[k][m] / s.counts[k][m] for k in active}
                best = means[leader(means)]
                eliminated = sorted(
                    k for k in active if best - means[k] >= 2 * alpha_l
                )
                active.difference_update(eliminated)
                for k in eliminated:
                    self._record("local_elim", m + 1, k + 1, means[k])

            if len(active) == 1:
                (k,) = active
                s.local_declarations[m] = k
                active.clear()
                self._record("declare_local", m + 1, k + 1)

        if len(s.global_active) > 1 and self.config.schedule.is_comm_step(n):
            active = sorted(s.global_active)
            s.comm_units += M * len(active)
            s.comm_rounds.append((n, len(active)))
            server_means: Dict[int, float] = {}
            for k in active:
                assert all(c == n for c in s.counts[k]), "sample counts out of sync"
                mu_k = sum(s.sums[k][m] / s.counts[k][m] for m in range(M)) / M
                server_means[k] = mu_k
                self._record("comm_round", None, k + 1, mu_k)
                if instrumented and abs(mu_k - self._global_means[k]) > alpha_g:
                    s.e_holds = False

            best = server_means[leader(server_means)]
            eliminated = [k for k in active if best - server_means[k] >= 2 * alpha_g]
            s.global_active.difference_update(eliminated)
            for k in eliminated:
                self._record("global_elim", None, k + 1, server_means[k])

        if len(s.global_active) == 1:
            (k,) = s.global_active
            s.global_declaration = k
            s.global_active.clear()
            self._record("declare_global", None, k + 1)

        return s

    def snapshot(self) -> Snapshot:
        s = self.state
        return Snapshot(
            n=s.n,
            local_active=tuple(tuple(sorted(k + 1 for k in a)) for a in s.local_active),
            global_active=tuple(sorted(k + 1 for k in s.global_active)),
            local_declarations=tuple(
                None if k is None else k + 1 for k in s.local_declarations
            ),
            global_declaration=(
                None if s.global_declaration is None else s.global_declaration + 1
            ),
            total_pulls=s.total_pulls,
            comm_units=s.comm_units,
        )

    def snapshots(self) -> Iterable[Snapshot]:
        """step until termination (or `max_steps`), yielding a snapshot per step"""
        while not self.state.terminated and self.state.n < self.config.max_steps:
            _ = self.step()
            yield self.snapshot()

    def run(self) -> RunResult:
        while not self.state.terminated and self.state.n < self.config.max_steps:
            _ = self.step()

        return self.result()

    def result(self) -> RunResult:
        s = self.state
        hit_max_steps = not s.terminated
        if hit_max_steps:
            logger.warning(
                "run stopped at max_steps={} before termination (trial {})",
                self.config.max_steps,
                self.trial,
            )
        else:
            logger.debug("trial {} terminated at step {}", self.trial, s.n)

        comm_cost = self.config.cost * s.comm_units
        return RunResult(
            local_declarations=[
                None if k is None else k + 1 for k in s.local_declarations
            ],
            global_declaration=(
                None if s.global_declaration is None else s.global_declaration + 1
            ),
            stop_step=s.n,
            total_pulls=s.total_pulls,
            pull_counts=[list(row) for row in s.counts],
            cost=self.config.cost,
            comm_cost=comm_cost,
            comm_round_count=len(s.comm_rounds),
            comm_rounds=[CommRound(step=n, active=a) for n, a in s.comm_rounds],
            total_cost=s.total_pulls + comm_cost,
            event_E_holds=None if self.trace is None else s.e_holds,
            hit_max_steps=hit_max_steps,
        )


def run(
    instance: ProblemInstance,
    config: RunConfig,
    trial: int = 0,
    rewards: Optional[RewardSource] = None,
) -> Tuple[RunResult, Optional[Trace]]:
    """run one trial to termination (or `config.max_steps`)"""
    engine = Engine(instance, config, trial, rewards)
    result = engine.run()
    return result, engine.trace


def event_E_holds(trace: Trace, instance: ProblemInstance) -> bool:
    """re-derive event E from the samples stored in a 'full' trace

    True iff every running client mean stays within the local radius of its
    sample count and every server mean within the global radius of its step.
    """
    if trace.level != "full":
        raise ValueError(f"trace level 'full' required, got '{trace.level}'")

    K, M = instance.num_arms, instance.num_clients
    delta, sigma = trace.delta, trace.sigma
    mu_global = global_means(instance)
    sums: Dict[Tuple[int, int], float] = {}
    counts: Dict[Tuple[int, int], int] = {}
    for event in trace.events:
        if event.event_type == "pull":
            assert event.arm is not None and event.client is not None
            assert event.value is not None
            key = (event.arm, event.client)
            sums[key] = sums.get(key, 0.0) + event.value
            counts[key] = s = counts.get(key, 0) + 1
            mu = instance.means[event.arm - 1][event.client - 1]
            if abs(sums[key] / s - mu) > local_radius(s, K, M, delta, sigma):
                return False

        elif event.event_type == "comm_round":
            assert event.arm is not None and event.value is not None
            if abs(event.value - mu_global[event.arm - 1]) > global_radius(
                event.n, K, M, delta, sigma
            ):
                return False

    return True
