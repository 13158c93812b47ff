"""Exception types raised across the harness."""


class SalbenchError(Exception):
    """Base class for all harness errors."""


class InvalidArgumentError(SalbenchError, ValueError):
    """A call violated an operation precondition."""


class InvalidStateError(SalbenchError, RuntimeError):
    """Input is in the wrong state for this operation (e.g. already normalized)."""


class InvalidDataError(SalbenchError, ValueError):
    """Input values are unusable (NaN/Inf, invariant violation)."""


class UndefinedDropError(SalbenchError, ValueError):
    """Average drop is undefined because the original score is zero."""


class UndefinedCorrelationError(SalbenchError, ValueError):
    """Correlation undefined (constant series or single-class binary vector)."""


class AlignmentError(SalbenchError, ValueError):
    """Metric series do not share the same sample ids."""


class MissingAnnotationError(SalbenchError, LookupError):
    """No bounding box annotated for the requested class."""


class EmptyAggregateError(SalbenchError, ValueError):
    """Aggregate requested over zero valid samples."""


class SingularSystemError(SalbenchError, RuntimeError):
    """Imputation system has no anchor values (every pixel masked)."""


class SolverFailureError(SalbenchError, RuntimeError):
    """Iterative solver did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ScorerUnavailableError(SalbenchError, ConnectionError):
    """Remote scorer unreachable or timed out."""


class ProtocolError(SalbenchError, RuntimeError):
    """Malformed or incompatible scorer protocol frame."""


class FormatError(SalbenchError, RuntimeError):
    """Malformed saliency-map file."""


class IngestError(SalbenchError, RuntimeError):
    """Dataset manifest or image file could not be loaded."""


class ConfigError(SalbenchError, ValueError):
    """Run configuration invalid; the pipeline aborts."""
