"""Shared domain types for boundary alignment.

Conventions: class indices and frame indices are 1-based, segment bounds are
inclusive. Arrays are stored 0-based and frozen (read-only) after construction,
so every value here can be shared across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from atba.errors import ValidationError

ROW_SUM_TOLERANCE = 1e-6


def _frozen(values: object, dtype: type) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


class Violation(NamedTuple):
    kind: str
    frame: int | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def frames(self, kind: str | None = None) -> list[int]:
        return [item.frame for item in self.violations if item.frame is not None and (kind is None or item.kind == kind)]

    def summary(self, limit: int = 10) -> str:
        lines = [f"{item.kind}: {item.detail}" for item in self.violations[:limit]]
        if len(self.violations) > limit:
            lines.append(f"... {len(self.violations) - limit} more violations")
        return "\n".join(lines)


def validate(values: "ProbabilitySequence | np.ndarray | Sequence[Sequence[float]]") -> ValidationReport:
    """Report every invariant violation of a probability matrix; never raises."""
    if isinstance(values, ProbabilitySequence):
        matrix = values.values
    else:
        try:
            matrix = np.asarray(values, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            return ValidationReport((Violation("shape", None, f"not a numeric matrix ({exc})"),))

    violations: list[Violation] = []
    if matrix.ndim != 2:
        return ValidationReport((Violation("shape", None, f"expected a 2-D matrix, got {matrix.ndim}-D"),))
    frames, classes = matrix.shape
    if frames < 1:
        violations.append(Violation("shape", None, "T must be at least 1"))
    if classes < 2:
        violations.append(Violation("shape", None, f"C must be at least 2, got {classes}"))
    if violations:
        return ValidationReport(tuple(violations))

    finite = np.isfinite(matrix)
    for frame in np.flatnonzero(~finite.all(axis=1)) + 1:
        violations.append(Violation("non-finite", int(frame), f"frame {frame} has non-finite entries"))
    out_of_range = finite & ((matrix < 0.0) | (matrix > 1.0))
    for frame in np.flatnonzero(out_of_range.any(axis=1)) + 1:
        row = matrix[frame - 1]
        bad = row[out_of_range[frame - 1]]
        violations.append(Violation("range", int(frame), f"frame {frame} has entries outside [0, 1]: {bad.tolist()}"))
    sums = matrix.sum(axis=1)
    drift = np.abs(sums - 1.0) > ROW_SUM_TOLERANCE
    for frame in np.flatnonzero(drift & finite.all(axis=1)) + 1:
        violations.append(Violation("row-sum", int(frame), f"frame {frame} sums to {sums[frame - 1]:.9g}"))
    return ValidationReport(tuple(violations))


@dataclass(frozen=True, eq=False)
class ProbabilitySequence:
    """T×C row-stochastic matrix of per-frame class probabilities."""

    values: np.ndarray

    def __post_init__(self) -> None:
        report = validate(self.values)
        if not report.passed:
            raise ValidationError("invalid probability sequence:\n" + report.summary())
        object.__setattr__(self, "values", _frozen(self.values, np.float64))

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    @property
    def C(self) -> int:
        return int(self.values.shape[1])

    def column(self, label: int) -> np.ndarray:
        return self.values[:, label - 1]

    def frames(self, indices: np.ndarray) -> np.ndarray:
        """Rows for 1-based frame indices, clamped to [1, T] (replicate padding)."""
        clamped = np.clip(np.asarray(indices), 1, self.T) - 1
        return self.values[clamped]


@dataclass(frozen=True)
class Transcript:
    """Ordered action classes of a video; adjacent entries always differ."""

    actions: tuple[int, ...]
    video_id: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        actions = tuple(int(item) for item in self.actions)
        errors = []
        if not actions:
            errors.append("transcript must contain at least one action")
        for position, label in enumerate(actions, start=1):
            if label < 1:
                errors.append(f"action {position} has class index {label} < 1")
        for position in range(1, len(actions)):
            if actions[position] == actions[position - 1]:
                errors.append(
                    f"actions {position} and {position + 1} repeat class {actions[position]}; "
                    "a transition requires a class change"
                )
        if errors:
            raise ValidationError("\n".join(errors))
        object.__setattr__(self, "actions", actions)

    @property
    def M(self) -> int:
        return len(self.actions)

    @property
    def transitions(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.actions[:-1], self.actions[1:]))

    @property
    def classes(self) -> frozenset[int]:
        return frozenset(self.actions)

    def check_classes(self, num_classes: int) -> None:
        bad = [label for label in self.actions if label > num_classes]
        if bad:
            raise ValidationError(f"transcript classes {bad} exceed class count C={num_classes}")


class Segment(NamedTuple):
    label: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Segmentation:
    """Run-length segments tiling frames 1..T."""

    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        segments = tuple(Segment(int(a), int(b), int(c)) for a, b, c in self.segments)
        errors = []
        if not segments:
            errors.append("segmentation must contain at least one segment")
        elif segments[0].start != 1:
            errors.append(f"first segment starts at {segments[0].start}, expected 1")
        for index, segment in enumerate(segments):
            if segment.end < segment.start:
                errors.append(f"segment {index + 1} ends before it starts: {segment}")
            if index and segment.start != segments[index - 1].end + 1:
                errors.append(f"segment {index + 1} starts at {segment.start}, expected {segments[index - 1].end + 1}")
            if index and segment.label == segments[index - 1].label:
                errors.append(f"segments {index} and {index + 1} share class {segment.label}")
        if errors:
            raise ValidationError("\n".join(errors))
        object.__setattr__(self, "segments", segments)

    @property
    def T(self) -> int:
        return self.segments[-1].end

    @property
    def labels_in_order(self) -> tuple[int, ...]:
        return tuple(segment.label for segment in self.segments)

    def to_labels(self) -> "PseudoLabels":
        lengths = [segment.length for segment in self.segments]
        return PseudoLabels(np.repeat(self.labels_in_order, lengths))


@dataclass(frozen=True, eq=False)
class PseudoLabels:
    """Length-T vector of 1-based class indices."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a non-empty 1-D vector")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ValidationError("labels must be integers")
        if labels.min() < 1:
            bad = np.flatnonzero(labels < 1)[:5] + 1
            raise ValidationError(f"labels must be >= 1; offending frames {bad.tolist()}")
        object.__setattr__(self, "labels", _frozen(labels, np.int64))

    @property
    def T(self) -> int:
        return int(self.labels.size)

    def check_classes(self, num_classes: int) -> None:
        bad = np.flatnonzero(self.labels > num_classes)
        if bad.size:
            raise ValidationError(
                f"labels exceed class count C={num_classes} at frames {(bad[:5] + 1).tolist()}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PseudoLabels):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __len__(self) -> int:
        return self.T


def segmentation_from_labels(labels: PseudoLabels | Iterable[int]) -> Segmentation:
    if not isinstance(labels, PseudoLabels):
        labels = PseudoLabels(np.asarray(list(labels)))
    values = labels.labels
    change = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [values.size])) - 1
    return Segmentation(tuple(Segment(int(values[s]), int(s) + 1, int(e) + 1) for s, e in zip(starts, ends)))


@dataclass(frozen=True, eq=False)
class BoundaryScoreSeries:
    scores: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size == 0:
            raise ValidationError("boundary scores must be a non-empty 1-D vector")
        if np.any(np.abs(scores) > 1.0 + 1e-12):
            raise ValidationError("boundary scores must lie in [-1, 1]")
        object.__setattr__(self, "scores", _frozen(scores, np.float64))

    @property
    def T(self) -> int:
        return int(self.scores.size)

    def at(self, frames: Sequence[int] | np.ndarray) -> np.ndarray:
        return self.scores[np.asarray(frames, dtype=np.int64) - 1]


@dataclass(frozen=True)
class CandidateSet:
    """Selected candidate boundaries; ``radius`` is the suppression radius used."""

    timestamps: tuple[int, ...]
    radius: int = 0

    def __post_init__(self) -> None:
        timestamps = tuple(int(item) for item in self.timestamps)
        if any(item <= 1 for item in timestamps):
            raise ValidationError("candidate timestamps must exceed frame 1")
        if any(b <= a for a, b in zip(timestamps, timestamps[1:])):
            raise ValidationError(f"candidate timestamps must be strictly increasing: {timestamps}")
        object.__setattr__(self, "timestamps", timestamps)

    @property
    def K(self) -> int:
        return len(self.timestamps)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.timestamps, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class TransitionScoreMatrix:
    """K×(M−1) scores of candidate k realizing transition r."""

    values: np.ndarray
    candidates: CandidateSet

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("transition scores must be a 2-D matrix")
        if values.shape[0] != self.candidates.K:
            raise ValidationError(
                f"transition scores have {values.shape[0]} rows but there are {self.candidates.K} candidates"
            )
        object.__setattr__(self, "values", _frozen(values, np.float64))

    @property
    def K(self) -> int:
        return int(self.values.shape[0])

    @property
    def transitions(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class AlignmentResult:
    """Selected boundaries (frames), the minimized cost and 1-based candidate indices."""

    boundaries: tuple[int, ...]
    total_cost: float
    matched_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.boundaries) != len(self.matched_indices):
            raise ValidationError("boundaries and matched indices differ in length")
        if any(b <= a for a, b in zip(self.matched_indices, self.matched_indices[1:])):
            raise ValidationError(f"matched indices must be strictly increasing: {self.matched_indices}")
