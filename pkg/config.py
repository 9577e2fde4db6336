import os
import logging
from typing import Dict, Optional

from dotenv import load_dotenv, dotenv_values

load_dotenv()

logger = logging.getLogger(__name__)


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise EnvironmentError(
            f"Environment variable {name} must be an integer, got {raw!r}. "
            f"Please fix your environment or .env file."
        )


# App Configuration
APP_NAME = "rankeval"
APP_DESCRIPTION = "Ranking evaluation metrics on symmetric groups"
APP_VERSION = "1.0.0"
DEBUG = os.getenv("RANKEVAL_DEBUG", "False") == "True"
LOG_LEVEL = "DEBUG" if DEBUG else os.getenv("RANKEVAL_LOG_LEVEL", "INFO").upper()

# Runtime defaults (environment overridable)
DEFAULT_SEED = _env_int("RANKEVAL_SEED", 42)
DEFAULT_WORKERS = max(1, _env_int("RANKEVAL_WORKERS", 1))
EXHAUSTIVE_LIMIT = _env_int("RANKEVAL_EXHAUSTIVE_LIMIT", 8)

# Agreement campaign defaults (heatmap regime)
AGREEMENT_N = 100
AGREEMENT_SAMPLE_RANKINGS = 10000
AGREEMENT_SAMPLE_PAIRS = 100000
RELEVANT_SIZE = 30  # j, also retrieved size k

# Property protocol defaults
PROTOCOL_N = 100
PROTOCOL_PAIRS = 1000
ROBUSTNESS_SWAP_SAMPLES = 50
ROBUSTNESS_ROUNDING = 2  # decimals
ROBUSTNESS_2_TRIPLES = 1000
ROBUSTNESS_2_TOLERANCE = 1e-9
STABILITY_PASS_FRACTION = 0.975
BOUNDS_SAMPLES = 1000
BOUNDS_LENGTHS = (5, 10, 20)
EQUALITY_RTOL = 1e-12

# Exhaustive oracle sizes per property
EXHAUSTIVE_SIZES = {
    "ioi": 6,
    "symmetry": 6,
    "wsd": 8,
    "sensitivity": 6,
    "distance": 4,
}

# Keys accepted in a KEY=value config file
CONFIG_FILE_KEYS = {
    "n", "samples", "pairs", "seed", "relevant", "retrieved", "metrics",
    "properties", "workers", "swap_samples", "exhaustive_n", "k",
    "mean_normalized",
}


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    Read a KEY=value config file.

    Lines follow the dotenv syntax (comments with #, optional quotes). Keys
    are the CLI flag names with dashes turned into underscores.

    Args:
        path: Path to the config file, or None

    Returns:
        Dictionary of recognised keys to raw string values
    """
    if not path:
        return {}
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")

    values = {}
    for key, value in dotenv_values(path).items():
        normalized = key.strip().lower().replace("-", "_")
        if normalized not in CONFIG_FILE_KEYS:
            logger.warning(f"Ignoring unknown config key {key!r} in {path}")
            continue
        if value is not None:
            values[normalized] = value
    return values
