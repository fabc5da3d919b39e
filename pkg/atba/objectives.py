"""Training objectives as value-and-gradient computations on plain arrays.

Losses take pre-activation scores and apply softmax/sigmoid internally, so
the log terms use stable log-sum-exp forms. No learning framework is needed;
gradients are analytic and can be checked against finite differences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax

from atba.config import Config
from atba.errors import DegenerateCentroidError, ValidationError
from atba.model import PseudoLabels, Transcript

logger = logging.getLogger(__name__)


def _finite_matrix(values: object, name: str, ndim: int) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name} must contain only finite values")
    return array


@dataclass(frozen=True, eq=False)
class LogitSequence:
    """T×C unnormalized frame scores whose softmax is the probability sequence."""

    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _finite_matrix(self.values, "logits", 2))


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    frames: np.ndarray
    prototypes: np.ndarray
    occurrence_logits: np.ndarray

    def __post_init__(self) -> None:
        frames = _finite_matrix(self.frames, "frame embeddings", 2)
        prototypes = _finite_matrix(self.prototypes, "class prototypes", 2)
        occurrence = _finite_matrix(self.occurrence_logits, "occurrence logits", 1)
        if frames.shape[1] < 1 or frames.shape[1] != prototypes.shape[1]:
            raise ValidationError(
                f"frame embeddings ({frames.shape[1]}) and prototypes ({prototypes.shape[1]}) disagree on d'"
            )
        if occurrence.shape[0] != prototypes.shape[0]:
            raise ValidationError(
                f"{occurrence.shape[0]} occurrence logits for {prototypes.shape[0]} prototypes"
            )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "prototypes", prototypes)
        object.__setattr__(self, "occurrence_logits", occurrence)

    @property
    def T(self) -> int:
        return int(self.frames.shape[0])

    @property
    def C(self) -> int:
        return int(self.prototypes.shape[0])


@dataclass
class LossReport:
    value: float
    gradients: dict[str, np.ndarray] = field(default_factory=dict)
    skipped_classes: list[int] = field(default_factory=list)

    @property
    def gradient(self) -> np.ndarray:
        """Gradient with respect to the primary input."""
        return next(iter(self.gradients.values()))


def frame_weights(labels: np.ndarray, config: Config) -> np.ndarray:
    weights = np.ones(labels.shape[0], dtype=np.float64)
    if config.background is not None:
        weights[labels == config.background] = config.background_weight
    return weights


def frame_classification_loss(
    logits: LogitSequence | np.ndarray,
    labels: PseudoLabels,
    config: Config,
) -> LossReport:
    values = logits.values if isinstance(logits, LogitSequence) else LogitSequence(logits).values
    frames, classes = values.shape
    if labels.T != frames:
        raise ValidationError(f"{labels.T} labels for {frames} frames of logits")
    labels.check_classes(classes)
    target = labels.labels - 1
    weights = frame_weights(labels.labels, config)

    log_probs = log_softmax(values, axis=1)
    picked = log_probs[np.arange(frames), target]
    value = -float(np.sum(weights * picked)) / frames

    gradient = np.exp(log_probs)
    gradient[np.arange(frames), target] -= 1.0
    gradient *= (weights / frames)[:, None]
    return LossReport(value, {"logits": gradient})


def occurrence_targets(transcript: Transcript, classes: int) -> np.ndarray:
    transcript.check_classes(classes)
    targets = np.zeros(classes, dtype=np.float64)
    targets[np.asarray(sorted(transcript.classes)) - 1] = 1.0
    return targets


def video_occurrence_loss(occurrence_logits: np.ndarray, transcript: Transcript) -> LossReport:
    logits = _finite_matrix(occurrence_logits, "occurrence logits", 1)
    classes = logits.shape[0]
    targets = occurrence_targets(transcript, classes)
    # -log σ(x) = log(1 + e^-x), -log(1 - σ(x)) = log(1 + e^x)
    per_class = targets * np.logaddexp(0.0, -logits) + (1.0 - targets) * np.logaddexp(0.0, logits)
    value = float(per_class.sum()) / classes
    gradient = (expit(logits) - targets) / classes
    return LossReport(value, {"occurrence_logits": gradient})


def _normalize(vectors: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ValidationError(f"cannot l2-normalize a zero {what} vector")
    return vectors / norms[:, None], norms


def _normalize_backward(grad: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    radial = np.sum(grad * unit, axis=1, keepdims=True)
    return (grad - unit * radial) / norms[:, None]


def global_local_contrastive_loss(
    embeddings: EmbeddingSet,
    labels: PseudoLabels,
    transcript: Transcript,
    tau: float,
    on_missing: str = "raise",
) -> LossReport:
    """InfoNCE between pseudo-label centroids and class prototypes.

    Centroids are means of raw frame embeddings, l2-normalized afterwards;
    prototypes are normalized at use. The softmax runs over all C prototypes.
    ``on_missing="skip"`` drops transcript classes without frames instead of raising.
    """
    if tau <= 0.0:
        raise ValidationError(f"tau must be positive, got {tau!r}")
    if on_missing not in ("raise", "skip"):
        raise ValidationError(f"on_missing must be 'raise' or 'skip', got {on_missing!r}")
    if labels.T != embeddings.T:
        raise ValidationError(f"{labels.T} labels for {embeddings.T} frame embeddings")
    transcript.check_classes(embeddings.C)
    labels.check_classes(embeddings.C)

    present = sorted(transcript.classes)
    counts = np.array([np.count_nonzero(labels.labels == label) for label in present])
    missing = [label for label, count in zip(present, counts) if count == 0]
    if missing:
        if on_missing == "raise":
            raise DegenerateCentroidError(f"transcript classes {missing} have no pseudo-labeled frames", missing)
        logger.warning("Skipping degenerate centroids for classes %s", missing)
    kept = [label for label, count in zip(present, counts) if count > 0]
    frames_grad = np.zeros_like(embeddings.frames)
    prototypes_grad = np.zeros_like(embeddings.prototypes)
    if not kept:
        return LossReport(0.0, {"frames": frames_grad, "prototypes": prototypes_grad}, missing)

    members = [labels.labels == label for label in kept]
    counts = np.array([mask.sum() for mask in members], dtype=np.float64)
    centroids = np.stack([embeddings.frames[mask].mean(axis=0) for mask in members])
    centroid_units, centroid_norms = _normalize(centroids, "centroid")
    prototype_units, prototype_norms = _normalize(embeddings.prototypes, "prototype")

    logits = centroid_units @ prototype_units.T / tau  # |kept| × C
    positives = np.asarray(kept) - 1
    rows = np.arange(len(kept))
    value = float(np.mean(logsumexp(logits, axis=1) - logits[rows, positives]))

    weights = softmax(logits, axis=1)
    weights[rows, positives] -= 1.0
    weights /= len(kept)
    centroid_unit_grad = weights @ prototype_units / tau
    prototype_unit_grad = weights.T @ centroid_units / tau

    centroid_grad = _normalize_backward(centroid_unit_grad, centroid_units, centroid_norms)
    for mask, count, grad in zip(members, counts, centroid_grad):
        frames_grad[mask] = grad / count
    prototypes_grad = _normalize_backward(prototype_unit_grad, prototype_units, prototype_norms)
    return LossReport(value, {"frames": frames_grad, "prototypes": prototypes_grad}, missing)


STAGE_COMPONENTS = {"I": ("vid",), "II": ("vid", "cls", "glc")}


def stage_loss(stage: str | int, components: Mapping[str, float], config: Config) -> float:
    """Stage I pretrains on occurrence only; stage II weights all three losses."""
    name = {1: "I", 2: "II"}.get(stage, stage) if isinstance(stage, int) else str(stage).upper()
    if name not in STAGE_COMPONENTS:
        raise ValidationError(f"unknown training stage {stage!r}; expected I or II")
    missing = [key for key in STAGE_COMPONENTS[name] if components.get(key) is None]
    if missing:
        raise ValidationError(f"stage {name} requires loss components {missing}")
    if name == "I":
        return float(components["vid"])
    return (
        config.alpha * float(components["vid"])
        + config.beta * float(components["cls"])
        + config.gamma * float(components["glc"])
    )
