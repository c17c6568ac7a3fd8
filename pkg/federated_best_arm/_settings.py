from typing import List, Literal

from loguru import logger
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings, extra="ignore"):
    """environment variables for federated_best_arm"""

    model_config = SettingsConfigDict(
        case_sensitive=False,
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="FEDBAI_",
    )

    trials: int = Field(100, ge=1)
    """default number of trials per experiment cell"""

    seed: int = Field(0, ge=0)
    """default master seed"""

    max_steps: int = Field(2**31, ge=1)
    """safety cap on the number of elimination steps of a single run"""

    sigma: float = Field(1.0, gt=0)
    """sub-Gaussian scale of the confidence radii"""

    trace_level: Literal["none", "events", "full"] = "events"
    """instrumentation level of engine runs started by the harness"""

    workers: int = Field(1, ge=1)
    """number of worker processes used to fan out trials"""

    include_first: bool = True
    """super-exponential schedules also communicate at n=1"""

    chunk_size: int = Field(1024, ge=1)
    """number of rewards pre-drawn per reward stream refill"""

    output_folder: str = "results"

    delta_grid: List[float] = [0.2, 0.1, 0.05, 0.01, 0.005, 0.001]
    """default confidence grid of sweeps"""

    max_errors: int = Field(5, ge=0)
    """maximal number of wrong declarations per cell accepted by `check`"""


settings = Settings()
logger.info("settings: {}", settings)
