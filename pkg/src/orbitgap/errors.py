"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: InputError -> 2, HypothesisViolation -> 1,
PrecisionExhausted / BudgetExceeded -> 3.  StageFailure wraps any of them with
the name of the pipeline stage that raised.
"""


class OrbitgapError(Exception):
    """Base class for all toolkit errors."""


class InputError(OrbitgapError):
    """Malformed problem file, bad parameters, or contract violation by the caller."""


class ContextMismatch(OrbitgapError):
    """Arithmetic attempted between values from different p-adic contexts."""


class HypothesisViolation(OrbitgapError):
    """A mathematical hypothesis the pipeline relies on failed to verify.

    Examples: the initial point is preperiodic, every defining polynomial
    composed with the interpolant vanishes at working precision (possible
    periodic subvariety), a declared target is periodic at every scanned prime.
    """


class PrecisionExhausted(OrbitgapError):
    """Working precision is insufficient to decide the question at hand."""


class BudgetExceeded(OrbitgapError):
    """A configured enumeration / size / iteration guard was hit."""


class StageFailure(OrbitgapError):
    """A pipeline stage failed; carries the stage name and the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
