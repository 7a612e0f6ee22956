"""Exception types raised by the devilstick library.

Everything derives from DevilstickError so callers can catch the whole
family at the CLI boundary and map it to an exit code.
"""


class DevilstickError(Exception):
    """Base class for all library errors."""


class ConfigError(DevilstickError):
    """A scenario configuration failed validation."""


class SingularMatrixError(DevilstickError):
    """Linear solve hit a pivot below the singularity threshold."""


class NoConvergenceError(DevilstickError):
    """An iterative numerical routine exhausted its iteration budget."""


class NotStabilizableError(DevilstickError):
    """Riccati iteration produced no stabilizing solution."""


class NotControllableError(DevilstickError):
    """Controllability matrix is rank-deficient at the working tolerance."""


class SingularVhcError(DevilstickError):
    """Constraint geometry makes the decoupling matrix singular."""


class DegenerateForceError(DevilstickError):
    """Force magnitude is below the floor where an application point exists."""


class BelowPotentialError(DevilstickError):
    """Requested energy level lies below the reduced potential here."""


class NotPropellerError(DevilstickError):
    """Requested orbit does not describe full-rotation motion."""


class NoCrossingError(DevilstickError):
    """Trajectory failed to reach the section before the time limit."""


class NonFiniteStateError(DevilstickError):
    """Integration produced a NaN or infinite state component."""


class EpisodeTimeoutError(DevilstickError):
    """High-gain episode failed to converge within its time budget."""
