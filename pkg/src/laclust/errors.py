"""Exception types shared across the toolkit."""


class LaclustError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LaclustError, ValueError):
    """Malformed input data, labels, or configuration values."""


class DegeneratePartitionError(ValidationError):
    """A partition has an empty cluster where a nonempty one is required."""


class CovarianceSingularityError(LaclustError):
    """A covariance matrix is singular or indefinite where positive
    definiteness is required."""


class EmptySoftClusterError(LaclustError):
    """A membership block carries (numerically) zero total mass, so no
    covariance can be estimated from it."""

    def __init__(self, block, mass):
        self.block = block
        self.mass = mass
        super().__init__(f"membership block {block} has total mass {mass:.3e}")


class NotRankOneError(LaclustError):
    """A membership block is not numerically rank one."""


class NumericFailureError(LaclustError):
    """A solver produced non-finite iterates."""


class ConfigError(LaclustError):
    """Invalid benchmark or CLI configuration."""
