"""Exception hierarchy for the boundary-alignment toolkit.

Every error raised on purpose by this package derives from ``AtbaError`` so the
CLI can turn it into a machine-readable diagnostic without catching unrelated
failures.
"""

from __future__ import annotations

from pathlib import Path


class AtbaError(Exception):
    """Base class for every error raised deliberately by this package."""

    kind = "error"

    def to_dict(self) -> dict[str, object]:
        return {"error": self.kind, "message": str(self)}


class ValidationError(AtbaError):
    """Raised when a value violates a domain invariant."""

    kind = "validation"


class ConfigError(AtbaError):
    """Raised when a hyperparameter or config source is invalid."""

    kind = "config"


class NoTransitionError(AtbaError):
    """Raised when an operation needs at least one transition but the transcript has one action."""

    kind = "no-transition"


class EmptyCandidateError(AtbaError):
    """Raised when no timestamp is eligible for candidate selection."""

    kind = "empty-candidates"


class InfeasibleAlignmentError(AtbaError):
    """Raised when fewer candidates than transitions are available for alignment."""

    kind = "infeasible-alignment"


class DegenerateCentroidError(AtbaError):
    """Raised when a transcript class has no pseudo-labeled frame to average."""

    kind = "degenerate-centroid"

    def __init__(self, message: str, classes: list[int]) -> None:
        super().__init__(message)
        self.classes = classes


class OracleTooLargeError(AtbaError):
    """Raised when a reference oracle would exceed its combinatorial guard."""

    kind = "oracle-too-large"


class UndefinedMetricError(AtbaError):
    """Raised when a metric has no frames or videos to average over."""

    kind = "undefined-metric"


class GeneratorError(AtbaError):
    """Raised when a synthetic corpus specification cannot be realized."""

    kind = "generator"


class FormatError(AtbaError):
    """Raised when a binary matrix file is malformed."""

    kind = "format"

    def __init__(self, message: str, path: Path | str | None = None, offset: int | None = None) -> None:
        location = ""
        if path is not None:
            location = f"{path}"
            if offset is not None:
                location += f" @ byte {offset}"
            location += ": "
        super().__init__(location + message)
        self.path = str(path) if path is not None else None
        self.offset = offset

    def to_dict(self) -> dict[str, object]:
        payload = super().to_dict()
        payload["path"] = self.path
        payload["offset"] = self.offset
        return payload


class SchemaError(AtbaError):
    """Raised when a structured-text document violates its schema."""

    kind = "schema"

    def __init__(self, message: str, path: Path | str | None = None, field: str | None = None) -> None:
        prefix = f"{path}: " if path is not None else ""
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)
        self.path = str(path) if path is not None else None
        self.field = field

    def to_dict(self) -> dict[str, object]:
        payload = super().to_dict()
        payload["path"] = self.path
        payload["field"] = self.field
        return payload


class UnsupportedVersionError(SchemaError):
    """Raised when a document declares a format_version this build cannot read."""

    kind = "unsupported-version"
