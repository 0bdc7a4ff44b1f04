"""Exception hierarchy shared by all modules."""


class LRError(Exception):
    """Base class for every error raised by :mod:`lrinvariants`."""


class GridMismatch(LRError):
    """Two grid objects (or a grid and its amplitudes) do not agree."""


class GridTooSmall(LRError):
    """A state is not negligible at the edge of the periodic grid."""


class ResolutionExceeded(LRError):
    """A transformed state no longer fits on the grid in position or momentum."""


class NonElliptic(LRError):
    """The quadratic form D p^2 + E(pq+qp) + F q^2 is not positive definite."""


class DegenerateForm(LRError):
    """E^2 - D F vanishes, so the linear part cannot be eliminated."""


class NoConvergence(LRError):
    """A nonlinear root finder failed to reach its tolerance."""


class ConservationError(LRError):
    """A quantity that must be conserved drifted beyond tolerance."""


class NonRealIntegrand(LRError):
    """The phase integrand picked up an imaginary part."""


class ZeroMomentumCoefficient(LRError):
    """The linear invariant has A(t) = 0; its eigenstates are position deltas."""


class OptimizerFailure(LRError):
    """No multistart branch of the least-squares fit converged."""


class DegenerateState(LRError):
    """An operator annihilates the supplied state to numerical precision."""


class ForceDomainError(LRError):
    """A tabulated force profile was queried outside its span."""


class ForceSyntaxError(LRError):
    """A force expression could not be parsed.

    Attributes
    ----------
    line, column : int
        1-based position of the offending character.
    """

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class ConfigError(LRError):
    """A scenario configuration file is malformed or inconsistent."""


class ResolutionWarning(UserWarning):
    """A propagated state is approaching the grid edge or the Nyquist band."""
