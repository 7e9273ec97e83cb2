"""Exception types shared across the package."""


class FianetError(Exception):
    """Base class for all package errors."""


class EmptyExpression(FianetError):
    """Raised when a referring expression is blank after trimming."""


class EmptyText(FianetError):
    """Raised when a token sequence of length zero reaches the text encoder."""


class AllMasked(FianetError):
    """Raised when every key/value token of a cross-attention call is padding."""


class ShapeError(FianetError):
    """Raised when a tensor does not satisfy a documented shape contract."""


class ShapeMismatch(FianetError):
    """Raised when two tensors that must share a shape do not."""


class EmptyEvaluation(FianetError):
    """Raised when metric aggregation receives no samples."""


class AmbiguousScene(FianetError):
    """Raised when a synthetic scene violates the unique-referent invariants."""


class ConfigError(FianetError):
    """Raised on malformed run configuration files or invalid field combinations."""
