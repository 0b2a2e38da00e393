"""Exception hierarchy shared by every module."""


class BilocError(Exception):
    """Base class for all errors raised by cvbiloc."""


class ParameterError(BilocError, ValueError):
    """A parameter lies outside its documented domain."""


class DimensionError(BilocError, ValueError):
    """Operands live on incompatible truncated spaces."""


class ContractError(BilocError, ValueError):
    """A precondition of an operation is violated."""


class CutoffError(BilocError, ValueError):
    """The Fock cutoff discards more probability than the tolerance allows."""

    def __init__(self, message, required_n_max=None):
        super().__init__(message)
        self.required_n_max = required_n_max


class DegenerateStateError(BilocError, ValueError):
    """The requested state vanishes identically."""


class NumericalIntegrityError(BilocError, ArithmeticError):
    """A computed quantity failed a numerical sanity check."""
