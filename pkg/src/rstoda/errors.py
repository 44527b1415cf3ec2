"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class so
that the CLI can map them onto exit codes without string matching.
"""


class RSTodaError(Exception):
    """Base class for all package errors."""


class SingularMatrix(RSTodaError):
    """LU factorization hit a pivot below the singularity threshold."""


class Overflow(RSTodaError):
    """A matrix function produced entries outside representable range."""


class NoConvergence(RSTodaError):
    """Iterative root finding failed; usually signals clustered roots."""


class CollisionSingularity(RSTodaError):
    """Two particles violate the minimum sinh-separation invariant."""


class ZeroVelocity(RSTodaError):
    """A particle velocity vanished where a logarithm/division needs it."""


class SingularLax(RSTodaError):
    """The Lax matrix is numerically singular (negative flows need L^-1)."""


class DegenerateNodes(RSTodaError):
    """Cauchy-matrix nodes coincide or are q-resonant."""


class ResolventSingular(RSTodaError):
    """A spectral parameter hit the spectrum of q^(+-1/2) L."""


class PoleEvaluation(RSTodaError):
    """Wave function evaluated at (or too close to) one of its poles."""


class CollisionEncountered(RSTodaError):
    """Flow integration approached the collision set.

    Carries the last accepted state so callers can inspect or restart.
    """

    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class StepUnderflow(RSTodaError):
    """Adaptive step size shrank below the hard floor."""


class ConfigError(RSTodaError):
    """Scenario configuration is malformed (CLI exit code 2)."""
