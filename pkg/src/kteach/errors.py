"""Exception hierarchy shared by all kteach modules."""


class KTError(Exception):
    """Base class for all errors raised by kteach."""


class ParseError(KTError):
    """Malformed robot description XML. Carries line/column info when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(KTError):
    """Well-formed XML that violates robot-description rules (missing limits, dangling links...)."""


class ChainError(KTError):
    """No kinematic chain exists between the requested links."""


class DimensionError(KTError):
    """Joint vector length does not match the chain's degrees of freedom."""


class InputError(KTError):
    """Caller-supplied value is unusable (non-finite target, nonpositive duration...)."""


class StateError(KTError):
    """Voice command rejected by the session state machine."""


class EmptyTrajectoryError(KTError):
    """A demonstration was stopped before any state was recorded."""


class UnavailableError(KTError):
    """Broker has been shut down."""


class SchemaError(KTError):
    """Wire message or trajectory file contents violate the declared schema."""


class CorruptFileError(KTError):
    """Trajectory file is truncated or its footer does not match the body."""


class ConfigError(KTError):
    """Invalid engine or scene configuration."""


class EvalError(KTError):
    """Scene cannot be scored in its current state."""


class DegenerateError(KTError):
    """Statistical test input carries no usable signal (all differences zero)."""


class InsufficientDataError(KTError):
    """Sample size outside the supported critical-value table range."""
