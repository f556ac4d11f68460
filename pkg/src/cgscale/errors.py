"""Exception hierarchy shared by the library and the CLI."""


class CGScaleError(Exception):
    """Base class for all errors raised by cgscale."""


class StructuralError(CGScaleError, ValueError):
    """Matrices or vectors with incompatible shapes."""


class InvariantViolation(CGScaleError):
    """A value breaks an invariant it is required to hold."""


class InputError(CGScaleError, ValueError):
    """Bad user-supplied data (streams, speeds, configuration)."""


class OversizeItemError(InputError):
    def __init__(self, partition, speed, capacity):
        self.partition = partition
        self.speed = speed
        self.capacity = capacity
        super().__init__(
            f"partition {partition} has speed {speed!r} above bin capacity {capacity!r}"
        )


class CapacityExhausted(CGScaleError):
    """Every consumer is already in use."""


class NotAssigned(CGScaleError, LookupError):
    """A partition has no consumer in the given assignment."""


class ModelDegenerate(CGScaleError):
    """The latency model cannot be evaluated (rebalanced queue with no read capacity)."""


class SimulationFault(CGScaleError):
    """A simulated component failed, e.g. a consumer never acknowledged."""


class ProtocolViolation(InvariantViolation):
    """The controller/consumer protocol ordering was broken."""
