"""problem instances, their ground truth and sub-optimality gaps

Arm and client indices are 1-based wherever they leave this package
(best arm profiles, validation reports, traces, records).
Internally `means[k][m]` is indexed from 0.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

from loguru import logger
from pydantic import model_validator
from typing_extensions import Self

from .common import FloatMatrix, Node

RewardKind = Literal["gaussian", "bernoulli", "empirical"]

_KIND_ALIASES: Dict[str, RewardKind] = {
    "gaussian": "gaussian",
    "gaussianunitvariance": "gaussian",
    "bernoulli": "bernoulli",
}


class InvalidInstanceError(ValueError):
    """raised by operations that need an instance satisfying all invariants"""

    def __init__(self, report: ValidationReport, message: Optional[str] = None):
        super().__init__(
            message
            or "invalid problem instance: "
            + "; ".join(v.message for v in report.violations)
        )
        self.report = report


class ProblemInstance(Node, frozen=True):
    """K×M mean matrix (rows are arms, columns are clients) and a reward model"""

    name: str = "custom"

    means: FloatMatrix
    """means[k][m] is the mean reward of arm k+1 at client m+1"""

    reward_kind: RewardKind = "gaussian"

    pools: Optional[Sequence[Sequence[Sequence[float]]]] = None
    """rating pools (empirical instances only), indexed like `means`"""

    arm_labels: Optional[Sequence[str]] = None
    client_labels: Optional[Sequence[str]] = None

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if len(self.means) < 2:
            raise ValueError(f"need at least 2 arms, got {len(self.means)}")

        num_clients = len(self.means[0])
        if num_clients < 1:
            raise ValueError("need at least 1 client")

        for k, row in enumerate(self.means, start=1):
            if len(row) != num_clients:
                raise ValueError(
                    f"arm {k} has {len(row)} client means, expected {num_clients}"
                )

        if self.reward_kind == "empirical":
            if self.pools is None:
                raise ValueError("empirical instances require rating pools")

            if len(self.pools) != len(self.means) or any(
                len(p) != num_clients for p in self.pools
            ):
                raise ValueError("pools must have the same K×M shape as means")

            for k, row in enumerate(self.pools, start=1):
                for m, pool in enumerate(row, start=1):
                    if not pool:
                        raise ValueError(f"empty pool for arm {k} at client {m}")

        elif self.pools is not None:
            raise ValueError("pools are only allowed for empirical instances")

        if self.arm_labels is not None and len(self.arm_labels) != len(self.means):
            raise ValueError("number of arm labels does not match K")

        if self.client_labels is not None and len(self.client_labels) != num_clients:
            raise ValueError("number of client labels does not match M")

        return self

    @property
    def num_arms(self) -> int:
        return len(self.means)

    @property
    def num_clients(self) -> int:
        return len(self.means[0])

    def arm_label(self, k: int) -> str:
        """label of (1-based) arm `k`"""
        return str(k) if self.arm_labels is None else self.arm_labels[k - 1]

    def client_label(self, m: int) -> str:
        """label of (1-based) client `m`"""
        return str(m) if self.client_labels is None else self.client_labels[m - 1]


class Violation(Node, frozen=True):
    rule: Literal["bernoulli_range", "pool_mean", "local_tie", "global_tie"]
    message: str
    client: Optional[int] = None
    arms: Sequence[int] = ()


class ValidationReport(Node, frozen=True):
    violations: Sequence[Violation] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


class BestArmProfile(Node, frozen=True):
    local_best: Sequence[int]
    """1-based local best arm of each client"""

    global_best: int
    """1-based global best arm"""

    global_means: Sequence[float]


class GapStructure(Node, frozen=True):
    local_gaps: FloatMatrix
    global_gaps: Sequence[float]


def exact_means(instance: ProblemInstance) -> List[List[Fraction]]:
    """mean matrix as exact rationals

    Empirical instances use the exact pool means, other kinds the exact
    value of the stored doubles.
    """
    if instance.pools is None:
        return [[Fraction(mu) for mu in row] for row in instance.means]

    return [
        [sum((Fraction(r) for r in pool), Fraction(0)) / len(pool) for pool in row]
        for row in instance.pools
    ]


def global_means(instance: ProblemInstance) -> List[float]:
    """across-client average of each arm's means (no validation required)"""
    return [sum(row) / instance.num_clients for row in instance.means]


def _maximizers(values: Sequence[Fraction]) -> List[int]:
    top = max(values)
    return [i for i, v in enumerate(values) if v == top]


def validate(instance: ProblemInstance) -> ValidationReport:
    """check all instance invariants; violations are returned, never raised"""
    violations: List[Violation] = []
    if instance.num_clients == 1:
        logger.warning(
            "instance '{}' has a single client; local and global problems coincide",
            instance.name,
        )

    if instance.reward_kind == "bernoulli":
        for k, row in enumerate(instance.means, start=1):
            for m, mu in enumerate(row, start=1):
                if not 0.0 <= mu <= 1.0:
                    violations.append(
                        Violation(
                            rule="bernoulli_range",
                            message=(
                                f"Bernoulli mean out of [0,1]: arm {k} at client {m}"
                                + f" has mean {mu}"
                            ),
                            client=m,
                            arms=[k],
                        )
                    )

    exact = exact_means(instance)
    if instance.pools is not None:
        for k, row in enumerate(exact, start=1):
            for m, mu in enumerate(row, start=1):
                if instance.means[k - 1][m - 1] != float(mu):
                    violations.append(
                        Violation(
                            rule="pool_mean",
                            message=(
                                f"mean of arm {k} at client {m} differs from its pool"
                                + f" mean {float(mu)}"
                            ),
                            client=m,
                            arms=[k],
                        )
                    )

    for m in range(instance.num_clients):
        tied = _maximizers([row[m] for row in exact])
        if len(tied) > 1:
            violations.append(
                Violation(
                    rule="local_tie",
                    message=f"local best of client {m + 1} not unique",
                    client=m + 1,
                    arms=[k + 1 for k in tied],
                )
            )

    # comparing sums is equivalent to comparing averages over M clients
    tied = _maximizers([sum(row, Fraction(0)) for row in exact])
    if len(tied) > 1:
        violations.append(
            Violation(
                rule="global_tie",
                message="global best arm not unique: arms "
                + ", ".join(str(k + 1) for k in tied),
                arms=[k + 1 for k in tied],
            )
        )

    return ValidationReport(violations=violations)


def compute_best_arms(instance: ProblemInstance) -> BestArmProfile:
    """local best arm of every client and the global best arm

    Raises:
        InvalidInstanceError: if any argmax is not unique
    """
    report = validate(instance)
    if any(v.rule in ("local_tie", "global_tie") for v in report.violations):
        raise InvalidInstanceError(report)

    exact = exact_means(instance)
    local_best = [
        _maximizers([row[m] for row in exact])[0] + 1
        for m in range(instance.num_clients)
    ]
    global_best = _maximizers([sum(row, Fraction(0)) for row in exact])[0] + 1
    return BestArmProfile(
        local_best=local_best,
        global_best=global_best,
        global_means=global_means(instance),
    )


def compute_gaps(instance: ProblemInstance) -> GapStructure:
    """local and global sub-optimality gaps

    The gap stored for a best arm is the smallest gap among the other arms.
    """
    profile = compute_best_arms(instance)
    local_gaps = [[0.0] * instance.num_clients for _ in range(instance.num_arms)]
    for m, best in enumerate(profile.local_best):
        top = instance.means[best - 1][m]
        others = [k for k in range(instance.num_arms) if k != best - 1]
        for k in others:
            local_gaps[k][m] = top - instance.means[k][m]

        local_gaps[best - 1][m] = min(local_gaps[k][m] for k in others)

    mu = profile.global_means
    best = profile.global_best - 1
    global_gaps = [mu[best] - mu_k for mu_k in mu]
    global_gaps[best] = min(g for k, g in enumerate(global_gaps) if k != best)
    return GapStructure(local_gaps=local_gaps, global_gaps=global_gaps)


SYNTHETIC_GAUSSIAN = ProblemInstance(
    name="synthetic-gaussian",
    means=[
        [0.9, 0.1, 0.1],
        [0.1, 0.9, 0.1],
        [0.1, 0.1, 0.9],
        [0.5, 0.5, 0.5],
    ],
    reward_kind="gaussian",
)
"""arm m is the local best arm of client m, arm 4 the global best arm"""

SYNTHETIC_BERNOULLI = ProblemInstance(
    name="synthetic-bernoulli",
    # published with one row per client; stored transposed (rows are arms)
    means=[
        [0.9, 0.85, 0.7],
        [0.85, 0.8, 0.6],
        [0.1, 0.3, 0.5],
    ],
    reward_kind="bernoulli",
)
"""arm 1 is the local best arm of every client and the global best arm"""

BUILTIN_INSTANCES: Dict[str, ProblemInstance] = {
    i.name: i for i in (SYNTHETIC_GAUSSIAN, SYNTHETIC_BERNOULLI)
}


def parse_instance_text(text: str, name: str = "custom") -> ProblemInstance:
    """parse the "K M kind" header followed by K lines of M means"""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty instance file")

    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"line 1: expected header 'K M kind', got '{lines[0]}'")

    try:
        num_arms, num_clients = int(header[0]), int(header[1])
    except ValueError:
        raise ValueError(f"line 1: K and M must be integers, got '{lines[0]}'")

    kind = _KIND_ALIASES.get(header[2].lower())
    if kind is None:
        raise ValueError(
            f"line 1: unknown reward kind '{header[2]}'"
            + " (empirical instances are created by `ingest`)"
        )

    if len(lines) - 1 != num_arms:
        raise ValueError(f"expected {num_arms} rows of means, got {len(lines) - 1}")

    means: List[List[float]] = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            row = [float(v) for v in line.split()]
        except ValueError:
            raise ValueError(f"line {i}: non-numeric mean in '{line}'")

        if len(row) != num_clients:
            raise ValueError(f"line {i}: expected {num_clients} means, got {len(row)}")

        means.append(row)

    return ProblemInstance(name=name, means=means, reward_kind=kind)


def format_instance_text(instance: ProblemInstance) -> str:
    if instance.reward_kind == "empirical":
        raise ValueError("empirical instances cannot be written as instance text")

    lines = [f"{instance.num_arms} {instance.num_clients} {instance.reward_kind}"]
    lines.extend(" ".join(repr(mu) for mu in row) for row in instance.means)
    return "\n".join(lines) + "\n"


def load_instance(source: Union[str, Path, ProblemInstance]) -> ProblemInstance:
    """resolve a builtin name, an instance text file or an ingested instance JSON"""
    if isinstance(source, ProblemInstance):
        return source

    if isinstance(source, str) and source in BUILTIN_INSTANCES:
        return BUILTIN_INSTANCES[source]

    path = Path(source)
    if not path.exists():
        raise ValueError(
            f"'{source}' is neither a builtin instance"
            + f" ({', '.join(BUILTIN_INSTANCES)}) nor an existing file"
        )

    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        # ingest summaries wrap the instance
        if isinstance(data, dict) and "instance" in data:
            data = data["instance"]

        return ProblemInstance.model_validate(data)

    return parse_instance_text(text, name=path.stem)
