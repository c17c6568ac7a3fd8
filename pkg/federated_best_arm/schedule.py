"""communication schedules: at which steps clients send their means to the server"""

from __future__ import annotations

import math
from typing import List, Literal, Union

from pydantic import Discriminator, Field, TypeAdapter
from typing_extensions import Annotated

from ._settings import settings
from .common import Node


class EveryStep(Node, frozen=True):
    """communicate at every step n ≥ 1"""

    kind: Literal["every"] = "every"

    def __str__(self) -> str:
        return "every"

    def is_comm_step(self, n: int) -> bool:
        return n >= 1

    def next_comm_step(self, n: int) -> int:
        return max(n, 0) + 1

    def count(self, horizon: int) -> int:
        """number of communication steps in [1, horizon]"""
        return max(horizon, 0)

    def enumerate(self, horizon: int) -> List[int]:
        return list(range(1, horizon + 1))


class Exponential(Node, frozen=True):
    """communicate at steps ⌈base^t⌉, t = 0, 1, 2, ..."""

    kind: Literal["exp"] = "exp"
    base: float = Field(2.0, ge=1 + 1e-6)

    def __str__(self) -> str:
        return f"exp:{self.base:g}"

    def _step(self, t: int) -> int:
        return math.ceil(self.base**t)

    def _exponent_below(self, n: int) -> int:
        """an exponent t with ⌈base^t⌉ ≤ n (close to the largest one)"""
        if n < 2:
            return 0

        return max(0, math.floor(math.log(n) / math.log(self.base)) - 1)

    def is_comm_step(self, n: int) -> bool:
        if n < 1:
            return False

        t = self._exponent_below(n)
        while (step := self._step(t)) <= n:
            if step == n:
                return True

            t += 1

        return False

    def next_comm_step(self, n: int) -> int:
        t = self._exponent_below(n)
        while (step := self._step(t)) <= n:
            t += 1

        return step

    def enumerate(self, horizon: int) -> List[int]:
        steps: List[int] = []
        t = 0
        while (step := self._step(t)) <= horizon:
            if not steps or step != steps[-1]:
                steps.append(step)

            t += 1

        return steps

    def count(self, horizon: int) -> int:
        return len(self.enumerate(horizon))


class Periodic(Node, frozen=True):
    """communicate at steps offset, offset + period, offset + 2·period, ..."""

    kind: Literal["periodic"] = "periodic"
    period: int = Field(ge=1)
    offset: int = Field(1, ge=1)

    def __str__(self) -> str:
        if self.offset == 1:
            return f"periodic:{self.period}"
        else:
            return f"periodic:{self.period}:{self.offset}"

    def is_comm_step(self, n: int) -> bool:
        return n >= self.offset and (n - self.offset) % self.period == 0

    def next_comm_step(self, n: int) -> int:
        if n < self.offset:
            return self.offset

        return self.offset + ((n - self.offset) // self.period + 1) * self.period

    def count(self, horizon: int) -> int:
        if horizon < self.offset:
            return 0

        return (horizon - self.offset) // self.period + 1

    def enumerate(self, horizon: int) -> List[int]:
        return list(range(self.offset, horizon + 1, self.period))


class SuperExponential(Node, frozen=True):
    """communicate at steps 2^(2^t), t = 0, 1, 2, ... (and at n=1 if `include_first`)"""

    kind: Literal["superexp"] = "superexp"
    include_first: bool = settings.include_first

    def __str__(self) -> str:
        return "superexp" if self.include_first else "superexp:literal"

    def is_comm_step(self, n: int) -> bool:
        if n == 1:
            return self.include_first

        if n < 2 or n & (n - 1):
            return False

        exponent = n.bit_length() - 1
        return exponent & (exponent - 1) == 0

    def next_comm_step(self, n: int) -> int:
        if n < 1 and self.include_first:
            return 1

        t = 0
        while (step := 2 ** (2**t)) <= n:
            t += 1

        return step

    def enumerate(self, horizon: int) -> List[int]:
        steps = [1] if self.include_first and horizon >= 1 else []
        t = 0
        while (step := 2 ** (2**t)) <= horizon:
            steps.append(step)
            t += 1

        return steps

    def count(self, horizon: int) -> int:
        return len(self.enumerate(horizon))


Schedule = Annotated[
    Union[EveryStep, Exponential, Periodic, SuperExponential], Discriminator("kind")
]

schedule_adapter: TypeAdapter[Schedule] = TypeAdapter(Schedule)


def is_comm_step(schedule: Schedule, n: int) -> bool:
    return schedule.is_comm_step(n)


def next_comm_step(schedule: Schedule, n: int) -> int:
    """smallest communication step strictly greater than `n`"""
    return schedule.next_comm_step(n)


def enumerate_steps(schedule: Schedule, horizon: int) -> List[int]:
    """ascending communication steps in [1, horizon]"""
    return schedule.enumerate(horizon)


def parse_schedule(text: Union[str, Schedule]) -> Schedule:
    """parse 'every', 'exp:<base>', 'periodic:<H>[:<offset>]', 'superexp' or
    'superexp:literal' (without the communication at n=1)"""
    if not isinstance(text, str):
        return text

    name, *args = text.strip().lower().split(":")
    try:
        if name == "every" and not args:
            return EveryStep()
        elif name == "exp" and len(args) <= 1:
            base = float(args[0]) if args else 2.0
            if base < 1 + 1e-6:
                raise ValueError(
                    f"exponential base {base} is too close to 1, use 'every' instead"
                )
            return Exponential(base=base)
        elif name == "periodic" and 1 <= len(args) <= 2:
            return Periodic(
                period=int(args[0]), offset=int(args[1]) if len(args) == 2 else 1
            )
        elif name == "superexp" and not args:
            return SuperExponential(include_first=True)
        elif name == "superexp" and args == ["literal"]:
            return SuperExponential(include_first=False)
    except ValueError as e:
        raise ValueError(f"invalid schedule '{text}': {e}") from e

    raise ValueError(
        f"invalid schedule '{text}', expected one of 'every', 'exp:<base>',"
        + " 'periodic:<H>[:<offset>]', 'superexp', 'superexp:literal'"
    )
