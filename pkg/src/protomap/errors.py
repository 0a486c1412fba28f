"""Exception hierarchy shared across the library.

The CLI maps these onto process exit codes: validation errors exit 2,
format errors exit 3, refiner errors exit 4.
"""


class ValidationError(ValueError):
    """Raised when an input violates an operation's preconditions."""


class EmptyGeometryError(ValidationError):
    """Raised when an operation requires at least one valid 3D point and has none."""


class IntegrityError(ValidationError):
    """Raised when cross-referenced indices (patch maps, point ids) are inconsistent."""


class FormatError(ValueError):
    """Raised when a file does not conform to its binary or structured-text format."""


class RefinerError(RuntimeError):
    """Raised when an external refiner hook fails. Carries the hook identifier."""

    def __init__(self, identifier: str, message: str):
        super().__init__(f"refiner '{identifier}': {message}")
        self.identifier = identifier
