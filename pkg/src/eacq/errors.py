"""Exception hierarchy."""


class EACQError(Exception):
    """Base class for all errors raised by this package."""


class LayoutError(EACQError, ValueError):
    """Subsystem labels or dimensions do not fit together."""


class StateError(EACQError, ValueError):
    """A matrix is not a valid density matrix (e.g. a negative eigenvalue)."""


class DomainError(EACQError, ValueError):
    """An argument lies outside the domain of the operation."""


class WitnessError(EACQError, ValueError):
    """A converse witness ensemble violates the purity requirement."""


class DecodeError(EACQError, ValueError):
    """Too many erasures to decode."""


class CompositionError(EACQError, ValueError):
    """A code cannot be concatenated with the requested protocol."""


class VerificationError(EACQError):
    """A randomized verification suite found a genuine violation."""
