"""Exception taxonomy shared by every module.

Each failure mode gets its own class so callers can catch precisely;
everything derives from BslError so ``except BslError`` is a safe net.
"""


class BslError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(BslError):
    """Array arguments have incompatible or unexpected dimensions."""


class NumericError(BslError):
    """A non-finite value (NaN/inf) appeared where finiteness is required."""


class DegeneracyError(BslError):
    """An input matrix is numerically rank-deficient."""


class FamilySpecError(BslError):
    """A task-family specification violates its own constraints."""


class SubspaceFormatError(BslError):
    """A serialized subspace file is malformed, truncated, or mismatched."""


class BudgetExceededError(BslError):
    """An objective call would exceed the hard evaluation budget."""


class TrainingError(BslError):
    """Meta-training diverged.  Carries the trace collected so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class OptimizerError(BslError):
    """A derivative-free optimizer hit an unrecoverable numeric state."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SelectionError(BslError):
    """Catalog lookup failed (no entry matches, or catalog unusable)."""


class ConfigError(BslError):
    """An experiment configuration is invalid.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
