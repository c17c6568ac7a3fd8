"""naive reference simulator

A literal, unoptimized rendition of federated successive elimination that
keeps every sample. It shares nothing with `engine.Engine` but the confidence
radii and the reward source, so that both can be compared step by step.
"""

from typing import Dict, Iterator, List, Optional, Set, Tuple

from .engine import RunConfig, Snapshot, global_radius, local_radius
from .instance import ProblemInstance
from .rewards import RewardSource, RewardStreams


def reference_snapshots(
    instance: ProblemInstance,
    config: RunConfig,
    trial: int = 0,
    rewards: Optional[RewardSource] = None,
) -> Iterator[Snapshot]:
    if rewards is None:
        rewards = RewardStreams(instance, config.seed, trial)

    K, M = instance.num_arms, instance.num_clients
    arms = list(range(1, K + 1))
    clients = list(range(1, M + 1))
    samples: Dict[Tuple[int, int], List[float]] = {
        (k, m): [] for k in arms for m in clients
    }
    local_sets: List[Set[int]] = [set(arms) for _ in clients]
    global_set: Set[int] = set(arms)
    local_out: List[Optional[int]] = [None for _ in clients]
    global_out: Optional[int] = None
    pulls = 0
    comm_units = 0
    comm_steps: Set[int] = set()
    horizon = 0

    def mean(k: int, m: int) -> float:
        values = samples[(k, m)]
        return sum(values) / len(values)

    n = 0
    while n < config.max_steps and (global_set or any(local_sets)):
        n += 1
        # S_m at the top of the iteration
        selection = [local_sets[m - 1] | global_set for m in clients]
        for m in clients:
            if len(selection[m - 1]) > 1:
                for k in sorted(selection[m - 1]):
                    samples[(k, m)].append(rewards.draw(k, m))
                    pulls += 1

        alpha_l = local_radius(n, K, M, config.delta, config.sigma)
        for m in clients:
            candidates = sorted(local_sets[m - 1])
            if len(candidates) > 1:
                pivot = candidates[0]
                for k in candidates:
                    if mean(k, m) > mean(pivot, m):
                        pivot = k

                for k in candidates:
                    if mean(pivot, m) - mean(k, m) >= 2 * alpha_l:
                        local_sets[m - 1].remove(k)

            if len(local_sets[m - 1]) == 1:
                local_out[m - 1] = local_sets[m - 1].pop()

        while horizon < n:
            horizon = max(2 * horizon, 64)
            comm_steps = set(config.schedule.enumerate(horizon))

        if n in comm_steps and len(global_set) > 1:
            candidates = sorted(global_set)
            comm_units += M * len(candidates)
            server = {k: sum(mean(k, m) for m in clients) / M for k in candidates}
            pivot = candidates[0]
            for k in candidates:
                if server[k] > server[pivot]:
                    pivot = k

            alpha_g = global_radius(n, K, M, config.delta, config.sigma)
            for k in candidates:
                if server[pivot] - server[k] >= 2 * alpha_g:
                    global_set.remove(k)

        if len(global_set) == 1:
            global_out = global_set.pop()

        yield Snapshot(
            n=n,
            local_active=tuple(tuple(sorted(s)) for s in local_sets),
            global_active=tuple(sorted(global_set)),
            local_declarations=tuple(local_out),
            global_declaration=global_out,
            total_pulls=pulls,
            comm_units=comm_units,
        )
