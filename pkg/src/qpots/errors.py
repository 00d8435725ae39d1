"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class NumericalFailureError(RuntimeError):
    """Linear algebra failed even after diagonal jitter escalation."""

    def __init__(self, message: str, jitter_ladder: tuple = ()):
        super().__init__(message)
        self.jitter_ladder = tuple(jitter_ladder)


class NotAvailableError(RuntimeError):
    """A requested feature is not available for the given inputs."""


class AcquisitionFailureError(RuntimeError):
    """No candidate could be produced within the allotted retries."""
