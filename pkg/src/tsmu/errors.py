"""Exception types shared across the package.

The CLI maps these onto exit codes: config/validation problems exit 2,
refusal to assign probabilities to an interfering history set exits 3,
conditioning on an impossible event exits 4.
"""


class TsmuError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatchError(TsmuError, ValueError):
    """States or masks defined on incompatible grids/shapes."""


class UsageError(TsmuError, ValueError):
    """Operation called with structurally invalid arguments."""


class PartitionError(TsmuError, ValueError):
    """A projector family is not exclusive and exhaustive."""


class ScheduleError(TsmuError, ValueError):
    """A requested time is not reachable with the configured step size."""


class ConfigError(TsmuError, ValueError):
    """Scenario configuration failed validation."""


class StateError(TsmuError, RuntimeError):
    """Operation requires an evolved/realized object and got a bare schema."""


class ConsistencyError(TsmuError, RuntimeError):
    """Probabilities requested for a history set that does not decohere."""


class ConditioningError(TsmuError, ValueError):
    """Conditioning event has zero probability; no observer exists there."""
