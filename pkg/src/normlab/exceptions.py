"""Exception hierarchy shared by every normlab module."""


class NormlabError(Exception):
    """Base class for all normlab errors."""


class DomainError(NormlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidInputError(NormlabError, ValueError):
    """Malformed input data (bad JSON, non-metric distance matrix, shape mismatch)."""


class DegenerateInputError(NormlabError, ValueError):
    """Inputs for which a certificate would be vacuous (e.g. x = y = 0)."""


class UnsupportedFamilyError(NormlabError, TypeError):
    """The operation is only defined for the built-in parametric families."""


class ConvergenceError(NormlabError, ArithmeticError):
    """A numerical routine failed to converge.

    Attributes
    ----------
    state : dict
        Solver state at the time of failure (bracket ends, iteration count).
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = dict(state or {})
