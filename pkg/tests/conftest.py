from pathlib import Path

import pytest

from federated_best_arm.instance import ProblemInstance

FIXTURES = Path(__file__).parent / "fixtures"


class MeanRewards:
    """reward source returning the true mean of every pair"""

    def __init__(self, instance: ProblemInstance):
        super().__init__()
        self.instance = instance
        self.draws = 0

    def draw(self, k: int, m: int) -> float:
        self.draws += 1
        return self.instance.means[k - 1][m - 1]


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def easy_instance():
    """large gaps: runs terminate within a few hundred steps"""
    return ProblemInstance(
        name="easy", means=[[4.0, 0.0], [0.0, 4.0], [3.0, 3.0]], reward_kind="gaussian"
    )


@pytest.fixture
def mean_rewards():
    return MeanRewards
