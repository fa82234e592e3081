"""Exception types shared by the package."""


class InvalidArgumentError(ValueError):
    """A precondition on an argument was violated."""


class BoundViolationError(RuntimeError):
    """A thinning proposal found the intensity above its dominating bound."""


class DomainError(ArithmeticError):
    """The shape function evaluated to a non-positive value where a log is needed."""


class DegeneratePathError(ArithmeticError):
    """A Wiener path with zero quadratic functional (ratio statistics undefined)."""


class StoppingTimeoutError(RuntimeError):
    """The sequential design did not reach its stopping time before the cap."""


class MissingThresholdsError(LookupError):
    """Limit power curves were requested without calibrated thresholds."""


class SchemaError(ValueError):
    """An input CSV does not have the expected columns."""
