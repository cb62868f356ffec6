class PolchainError(Exception):
    """Base class for all errors raised by polchain."""


class InvalidInputError(PolchainError, ValueError):
    pass


class SingularityError(PolchainError, ValueError):
    """Raised for a zero-separation dipole-dipole evaluation."""


class PoleError(PolchainError, ValueError):
    """Raised when the secular function is evaluated on one of its poles."""


class ConvergenceError(PolchainError, RuntimeError):
    """Eigensolver failed to reach the requested residual.

    The achieved residual is kept on ``residual`` so callers can decide
    whether to accept the result anyway.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ClassificationError(PolchainError):
    pass


class SampleError(PolchainError):
    """A disorder sample failed; the original error is ``__cause__``."""

    def __init__(self, stream_index, cause):
        super().__init__(f"stream {stream_index}: {type(cause).__name__}: {cause}")
        self.stream_index = stream_index
