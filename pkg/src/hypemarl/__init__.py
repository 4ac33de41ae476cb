"""Decentralized multi-agent TD3 with hypernetwork-parametrized agents
for distributed control of parametric Fokker-Planck dynamics."""

from .errors import (
    ConfigurationError,
    HypemarlError,
    NumericalError,
    TrainingError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "HypemarlError",
    "NumericalError",
    "TrainingError",
    "UsageError",
    "__version__",
]
