"""Configuration for the smoothed dynamic programming tools."""

from __future__ import annotations

import os
from dataclasses import dataclass

from dotenv import load_dotenv


load_dotenv()

# Regularizers accepted on the command line and in settings
REGULARIZERS = ("entropy", "l2")

# Numerical tolerances
TIE_ATOL = 1e-12

# Finite differences (central, step FD_EPSILON)
FD_EPSILON = 1e-4
FD_NORM_FLOOR = 1e-6
GRADIENT_RTOL = 1e-4
HESSIAN_RTOL = 1e-3
ORACLE_VALUE_ATOL = 1e-9
ORACLE_PATH_ATOL = 1e-10
MIN_STABLE_FRACTION = 0.8

# Vanishing regularization: entries >= threshold round to 1
ROUNDING_THRESHOLD = 0.5

# Path products switch to log space past this many edges
LOG_SPACE_PATH_LENGTH = 64

# Resource caps
PATH_CAP = 10**6
NODE_CAP = 10**6

# Output formats
FLOAT_FORMAT = "%.17g"
CSV_SEPARATOR = ","

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass(frozen=True)
class Settings:
    default_reg: str
    default_gamma: float
    path_cap: int
    node_cap: int
    fd_epsilon: float
    gradcheck_trials: int
    max_concurrency: int
    log_level: str


def get_settings() -> Settings:
    """Load and return settings from environment variables."""
    default_reg = os.getenv("SMOOTHED_DP_REG", "entropy")
    if default_reg not in REGULARIZERS:
        raise ValueError(
            f"SMOOTHED_DP_REG must be one of {', '.join(REGULARIZERS)}, got {default_reg!r}."
        )

    return Settings(
        default_reg=default_reg,
        default_gamma=float(os.getenv("SMOOTHED_DP_GAMMA", "1.0")),
        path_cap=int(os.getenv("SMOOTHED_DP_PATH_CAP", str(PATH_CAP))),
        node_cap=int(os.getenv("SMOOTHED_DP_NODE_CAP", str(NODE_CAP))),
        fd_epsilon=float(os.getenv("SMOOTHED_DP_FD_EPSILON", str(FD_EPSILON))),
        gradcheck_trials=int(os.getenv("SMOOTHED_DP_GRADCHECK_TRIALS", "20")),
        max_concurrency=int(os.getenv("SMOOTHED_DP_MAX_CONCURRENCY", "4")),
        log_level=os.getenv("SMOOTHED_DP_LOG_LEVEL", "WARNING").upper(),
    )
