"""Exception types shared across the toolkit."""


class KClusterError(Exception):
    """Base class for toolkit errors."""


class InputError(KClusterError, ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(KClusterError):
    """Exact computation requested beyond its size budget."""


class ConstructionError(KClusterError):
    """A combinatorial construction could not be completed."""


class ResampleError(ConstructionError):
    """A randomized generator exhausted its retry budget."""
