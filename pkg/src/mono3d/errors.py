"""Exception types shared across the package."""


class Mono3DError(Exception):
    """Base class for every error raised by this library."""


class FormatError(Mono3DError):
    """Malformed input file. Carries the offending path and line when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(Mono3DError):
    """Input violates a documented invariant (bad sigma, non-finite field, ...)."""


class GeometryError(Mono3DError):
    """Geometric precondition failed (point behind camera, degenerate line, ...)."""


class EvaluationError(Mono3DError):
    """Evaluation cannot proceed (no evaluable ground truth, frame mismatch, ...)."""
