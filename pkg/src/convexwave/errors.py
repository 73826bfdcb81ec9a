"""Exception types shared across the package."""


class ConvexwaveError(Exception):
    """Base class for package errors."""


class ConfigurationError(ConvexwaveError):
    """Invalid geometry, parameters or input files."""


class SolverError(ConvexwaveError):
    """A numerical solve failed to meet its contract.

    ``report`` carries the solver diagnostics that were available at the
    point of failure (may be None for early failures).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateDataError(ConvexwaveError):
    """Boundary data unusable, e.g. vanishing total field before the log."""
