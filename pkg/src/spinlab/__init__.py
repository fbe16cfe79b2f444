"""Glauber dynamics for Ising models with a negative rank-one spectral outlier."""
__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .errors import CapacityError, ConfigError, SpinlabError  # noqa: E402
from .model import IsingModel  # noqa: E402

__all__ = ["BACKEND", "CapacityError", "ConfigError", "IsingModel", "SpinlabError", "__version__"]
