"""Exception taxonomy shared across the package.

Every error raised by the library is a subclass of OptdesError, so callers
(including the CLI) can map failures onto exit codes without string matching.
"""


class OptdesError(Exception):
    """Base class for all library errors."""


class ValidationError(OptdesError, ValueError):
    """Malformed inputs: bad shapes, bad option values, broken invariants."""


class DimensionError(ValidationError):
    """A vector or matrix has the wrong length for the model at hand."""


class UnsupportedModelError(ValidationError):
    """The requested family/link/basis combination is not implemented."""


class LinkDomainError(OptdesError, ValueError):
    """A linear predictor value falls outside the link's domain."""

    def __init__(self, link_kind, value, detail=""):
        self.link_kind = link_kind
        self.value = value
        msg = f"linear predictor {value!r} outside the domain of link '{link_kind}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SingularDesignError(OptdesError, ArithmeticError):
    """An operation needed an invertible information matrix and did not get one."""


class NumericalError(OptdesError, ArithmeticError):
    """An iterative routine failed to produce a usable result."""


class PreconditionError(OptdesError, ValueError):
    """A closed-form construction was asked for outside its precondition."""
