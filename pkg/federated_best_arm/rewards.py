"""seeded reward streams

Every (arm, client) pair of a trial owns its own generator, seeded from
(seed, trial, client, arm), so a stream's rewards never depend on which other
pairs were pulled, in which order trials run, or on which worker.
"""

from __future__ import annotations

from typing import Callable, Dict, Protocol, Tuple

import numpy as np
from numpy.typing import NDArray

from ._settings import settings
from .instance import ProblemInstance

Sampler = Callable[[np.random.Generator, int], NDArray[np.float64]]
"""draws a block of `size` rewards from a generator"""


class RewardSource(Protocol):
    def draw(self, k: int, m: int) -> float:
        """next reward of (1-based) arm `k` at (1-based) client `m`"""
        ...


class RewardStream:
    """deterministic reward sequence of one (arm, client) pair in one trial"""

    def __init__(
        self,
        seed: int,
        trial: int,
        client: int,
        arm: int,
        chunk_size: int = settings.chunk_size,
    ) -> None:
        super().__init__()
        self.key = (seed, trial, client, arm)
        self.chunk_size = chunk_size
        self.generator = np.random.default_rng(np.random.SeedSequence(self.key))
        self._block: NDArray[np.float64] = np.empty(0)
        self._position = 0

    def __repr__(self) -> str:
        return f"RewardStream(key={self.key})"

    def next(self, sampler: Sampler) -> float:
        if self._position == len(self._block):
            self._block = sampler(self.generator, self.chunk_size)
            self._position = 0

        value = self._block[self._position]
        self._position += 1
        return float(value)


def make_sampler(instance: ProblemInstance, k: int, m: int) -> Sampler:
    """reward model of (1-based) arm `k` at (1-based) client `m`"""
    mu = instance.means[k - 1][m - 1]
    if instance.reward_kind == "gaussian":

        def gaussian(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
            return rng.normal(mu, 1.0, size)

        return gaussian

    if instance.reward_kind == "bernoulli":

        def bernoulli(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
            return (rng.random(size) < mu).astype(np.float64)

        return bernoulli

    assert instance.pools is not None
    pool = np.asarray(instance.pools[k - 1][m - 1], dtype=np.float64)

    def empirical(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return pool[rng.integers(0, len(pool), size)]

    return empirical


def draw_reward(
    instance: ProblemInstance, stream: RewardStream, k: int, m: int
) -> float:
    """draw the next reward of arm `k` at client `m` from `stream`"""
    return stream.next(make_sampler(instance, k, m))


class RewardStreams:
    """the reward streams of all (arm, client) pairs of one trial

    Streams are created lazily on first use and never shared between trials.
    """

    def __init__(
        self,
        instance: ProblemInstance,
        seed: int,
        trial: int,
        chunk_size: int = settings.chunk_size,
    ) -> None:
        super().__init__()
        self.instance = instance
        self.seed = seed
        self.trial = trial
        self.chunk_size = chunk_size
        self._streams: Dict[Tuple[int, int], Tuple[RewardStream, Sampler]] = {}

    def stream(self, k: int, m: int) -> RewardStream:
        return self._get(k, m)[0]

    def _get(self, k: int, m: int) -> Tuple[RewardStream, Sampler]:
        entry = self._streams.get((k, m))
        if entry is None:
            entry = (
                RewardStream(self.seed, self.trial, m, k, self.chunk_size),
                make_sampler(self.instance, k, m),
            )
            self._streams[(k, m)] = entry

        return entry

    def draw(self, k: int, m: int) -> float:
        stream, sampler = self._get(k, m)
        return stream.next(sampler)
