"""Static-stress (BTI) observation and mitigation simulator."""

from .config import ConfigError, ExperimentConfig
from .sim import Simulator, compare, run

__version__ = "0.1.0"

__all__ = ["ConfigError", "ExperimentConfig", "Simulator", "compare", "run"]
