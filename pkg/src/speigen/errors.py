"""Exception hierarchy."""


class SpEigenError(Exception):
    """Base class for all package errors."""


class ContractError(SpEigenError, ValueError):
    """Inputs violate an operation's preconditions (e.g. mismatched grids)."""


class DomainError(SpEigenError, ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(SpEigenError):
    """No eigenvalue bracket with the requested node count could be found."""

    def __init__(self, message, *, n=None, lo=None, hi=None, nodes_lo=None, nodes_hi=None):
        super().__init__(message)
        self.n = n
        self.lo = lo
        self.hi = hi
        self.nodes_lo = nodes_lo
        self.nodes_hi = nodes_hi


class NodeCountError(SpEigenError):
    """The shooting solution does not carry the requested number of nodes."""

    def __init__(self, message, *, expected=None, found=None):
        super().__init__(message)
        self.expected = expected
        self.found = found


class FeatureError(SpEigenError):
    """Structural features could not be extracted consistently."""

    def __init__(self, message, *, expected=None, found=None):
        super().__init__(message)
        self.expected = expected
        self.found = found


class FitError(SpEigenError, ValueError):
    """A least-squares fit is ill-posed for the supplied data."""
