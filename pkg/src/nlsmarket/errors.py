"""Exception types shared across the library."""


class ConfigError(ValueError):
    """Invalid grid, solver, or model configuration."""


class IntegrationError(RuntimeError):
    """Base class for time-integration failures.

    Attributes:
        t: time at which the integration gave up.
        stats: StepStats accumulated up to the failure, when available.
        record: partial simulation record attached by higher-level drivers.
    """

    def __init__(self, message, t=None, stats=None):
        super().__init__(message)
        self.t = t
        self.stats = stats
        self.record = None


class StepBudgetError(IntegrationError):
    """The step budget was exhausted before reaching the end time."""


class StiffnessError(IntegrationError):
    """The error norm cannot be satisfied even at the minimum step size."""


class NonFiniteError(IntegrationError):
    """A right-hand side produced a non-finite value.

    ``node`` identifies the first offending grid node when known.
    """

    def __init__(self, message, t=None, node=None):
        super().__init__(message, t)
        self.node = node
