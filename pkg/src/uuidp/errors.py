"""Exception types shared across the package."""


class UUIDPError(Exception):
    """Base class for all errors raised by :mod:`uuidp`."""


class InvalidParameter(UUIDPError, ValueError):
    pass


class Exhausted(UUIDPError):
    """A generator instance cannot emit another ID."""


class CapacityExceeded(UUIDPError):
    """An adversary requested more IDs from an instance than its capacity.

    This signals a mis-specified experiment, never a collision.
    """


class BudgetExceeded(UUIDPError):
    """An exact enumeration would exceed its explicit work budget."""


class InvalidSequence(UUIDPError, ValueError):
    pass
