"""Exception hierarchy shared across the package."""


class HypemarlError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HypemarlError):
    """Invalid dimensions, specs, or config values."""


class UsageError(HypemarlError):
    """API misuse, e.g. reusing a consumed tape or sampling an empty buffer."""


class TrainingError(HypemarlError):
    """Non-finite losses or gradients encountered during training."""


class NumericalError(HypemarlError):
    """Solver failures, e.g. conjugate gradients not converging."""
