"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: tolerance breaches are reported, not
raised; ``ConfigError`` exits 2 and ``NumericalFailure`` exits 3.
"""


class ContractViolation(ValueError):
    """An operation was called outside its documented preconditions."""


class DomainError(ValueError):
    """A scalar argument lies outside the operation's mathematical domain."""


class ConfigError(ValueError):
    """A run configuration failed validation at parse time."""


class NumericalFailure(RuntimeError):
    """The numerics broke down (characteristic crossing, mass drift, divergence)."""


class CausticError(NumericalFailure):
    """Hamilton-Jacobi characteristics crossed; the cutoff time is too small."""


class MassDriftError(NumericalFailure):
    """The L2 norm drifted beyond tolerance during time stepping."""


class PicardDivergence(NumericalFailure):
    """The fixed-point iteration grew instead of contracting."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
