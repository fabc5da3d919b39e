"""Seeded synthetic videos standing in for a neural frontend.

Randomness comes from numpy's counter-based Philox bit generator keyed by
``SeedSequence([seed, 1, index])`` per video and ``[seed, 0, 0]`` for the
class embedding means, so a video depends only on (seed, index) and never on
generation order or platform.

A video is built in this order: transcript and segment lengths, one-hot
probabilities, distractor excursions, cross-fades at every change point, confusion
noise, then embeddings.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from atba.errors import GeneratorError
from atba.fileio import (
    EMBEDDING_MAGIC,
    PROBS_MAGIC,
    write_labels,
    write_manifest,
    write_matrix,
    write_transcript,
    write_vocabulary,
)
from atba.model import ProbabilitySequence, PseudoLabels, Transcript
from atba.objectives import EmbeddingSet

logger = logging.getLogger(__name__)

OCCURRENCE_MARGIN = 3.0
OCCURRENCE_NOISE = 0.5


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int = 0
    videos: int = 10
    frames: tuple[int, int] = (300, 600)
    actions: tuple[int, int] = (2, 6)
    classes: int = 10
    background: int | None = None
    background_rate: float = 0.0
    confusion: float = 0.0
    smoothing_radius: int = 0
    distractor_rate: float = 0.0
    distractor_strength: float = 1.0
    distractor_clearance: float = 0.35
    embedding_dim: int = 8
    embedding_noise: float = 0.1
    min_segment_length: int = 31
    length_concentration: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(int(item) for item in self.frames))
        object.__setattr__(self, "actions", tuple(int(item) for item in self.actions))
        errors = []
        for name in ("frames", "actions"):
            bounds = getattr(self, name)
            if len(bounds) != 2 or bounds[0] < 1 or bounds[1] < bounds[0]:
                errors.append(f"{name} must be a non-empty [low, high] range of positive integers, got {list(bounds)}")
        if errors:
            raise GeneratorError("\n".join(errors))
        if self.videos < 0:
            errors.append(f"videos must be >= 0, got {self.videos}")
        if self.classes < 2:
            errors.append(f"classes must be >= 2, got {self.classes}")
        if self.background is not None and not 1 <= self.background <= self.classes:
            errors.append(f"background {self.background} is not a class in 1..{self.classes}")
        for name in ("background_rate", "confusion", "distractor_rate", "distractor_strength"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                errors.append(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.distractor_clearance < 0.5:
            errors.append(f"distractor_clearance must lie in [0, 0.5), got {self.distractor_clearance}")
        if self.background_rate > 0.0 and self.background is None:
            errors.append("background_rate > 0 requires a background class")
        if self.background_rate >= 1.0:
            errors.append("background_rate must leave room for at least one action frame")
        if self.smoothing_radius < 0:
            errors.append(f"smoothing_radius must be >= 0, got {self.smoothing_radius}")
        if self.embedding_dim < 1:
            errors.append(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.embedding_noise < 0.0:
            errors.append(f"embedding_noise must be >= 0, got {self.embedding_noise}")
        if self.length_concentration <= 0.0:
            errors.append(f"length_concentration must be positive, got {self.length_concentration}")
        if self.min_segment_length < max(1, 2 * self.smoothing_radius):
            errors.append(
                f"min_segment_length {self.min_segment_length} must be >= 2 * smoothing_radius "
                f"({2 * self.smoothing_radius}) and >= 1"
            )
        if self.frames[0] < self.actions[1] * self.min_segment_length:
            errors.append(
                f"{self.frames[0]} frames cannot hold {self.actions[1]} segments of at least "
                f"{self.min_segment_length} frames"
            )
        if self.actions[1] > 1 and len(self.action_classes) < 2:
            errors.append("at least two non-background classes are needed for transitions")
        if errors:
            raise GeneratorError("\n".join(errors))

    @property
    def action_classes(self) -> list[int]:
        return [label for label in range(1, self.classes + 1) if label != self.background]

    @classmethod
    def profile(cls, name: str, **overrides: Any) -> "GeneratorSpec":
        """Named noise profiles: ``clean`` (noise-free) and ``distractor`` (noisy boundaries)."""
        profiles: dict[str, dict[str, Any]] = {
            "clean": {"frames": (400, 600), "actions": (2, 5), "min_segment_length": 64},
            "distractor": {
                "frames": (500, 900),
                "actions": (2, 6),
                "confusion": 0.2,
                "smoothing_radius": 10,
                "distractor_rate": 1.0,
                "min_segment_length": 80,
                "length_concentration": 8.0,
            },
        }
        if name not in profiles:
            raise GeneratorError(f"unknown generator profile {name!r}; expected one of {sorted(profiles)}")
        return cls(**{**profiles[name], **overrides})

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "GeneratorSpec":
        values = dict(values)
        values.pop("format_version", None)
        profile = values.pop("profile", None)
        unknown = set(values) - {item.name for item in fields(cls)}
        if unknown:
            raise GeneratorError(f"unknown generator spec keys: {sorted(unknown)}")
        if profile is not None:
            return cls.profile(profile, **values)
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["frames"] = list(self.frames)
        payload["actions"] = list(self.actions)
        return payload

    def with_overrides(self, **overrides: Any) -> "GeneratorSpec":
        return replace(self, **overrides)


class SyntheticVideo(NamedTuple):
    sequence: ProbabilitySequence
    embeddings: EmbeddingSet
    transcript: Transcript
    truth: PseudoLabels


def video_id(index: int) -> str:
    return f"video_{index:05d}"


def video_rng(spec: GeneratorSpec, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 1, index])))


def class_means(spec: GeneratorSpec) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, 0, 0])))
    return rng.normal(size=(spec.classes, spec.embedding_dim))


def draw_transcript(spec: GeneratorSpec, rng: np.random.Generator, segments: int) -> tuple[list[int], list[bool]]:
    """Ordered classes plus a flag per segment marking background."""
    backgrounds = 0
    if spec.background_rate > 0.0 and segments >= 2:
        backgrounds = int(rng.integers(1, (segments + 1) // 2 + 1))
    actions = segments - backgrounds
    # Background segments occupy distinct gaps around the actions so they never touch each other.
    gaps = set(rng.choice(actions + 1, size=backgrounds, replace=False).tolist()) if backgrounds else set()

    pool = spec.action_classes
    labels: list[int] = []
    is_background: list[bool] = []
    for position in range(actions + 1):
        if position in gaps:
            labels.append(spec.background)
            is_background.append(True)
        if position == actions:
            break
        options = [label for label in pool if not labels or label != labels[-1]]
        labels.append(int(rng.choice(options)))
        is_background.append(False)
    return labels, is_background


def split_lengths(total: int, parts: int, minimum: int, concentration: float, rng: np.random.Generator) -> np.ndarray:
    if parts == 0:
        return np.zeros(0, dtype=np.int64)
    extra = total - parts * minimum
    if extra < 0:
        raise GeneratorError(f"{total} frames cannot hold {parts} segments of at least {minimum} frames")
    shares = rng.dirichlet(np.full(parts, concentration))
    return minimum + rng.multinomial(extra, shares)


def draw_lengths(spec: GeneratorSpec, rng: np.random.Generator, frames: int, is_background: list[bool]) -> np.ndarray:
    minimum = spec.min_segment_length
    flags = np.asarray(is_background)
    backgrounds = int(flags.sum())
    actions = flags.size - backgrounds
    background_frames = 0
    if backgrounds:
        target = int(round(spec.background_rate * frames))
        background_frames = min(max(target, backgrounds * minimum), frames - actions * minimum)
    lengths = np.empty(flags.size, dtype=np.int64)
    lengths[flags] = split_lengths(background_frames, backgrounds, minimum, spec.length_concentration, rng)
    lengths[~flags] = split_lengths(frames - background_frames, actions, minimum, spec.length_concentration, rng)
    return lengths


def add_distractors(
    spec: GeneratorSpec,
    rng: np.random.Generator,
    probabilities: np.ndarray,
    labels: list[int],
    lengths: np.ndarray,
    name: str,
) -> int:
    """Shift probability mass to a class outside the transcript in the middle of some segments.

    Each excursion keeps ``distractor_clearance`` of the longer of its segment
    and the video's mean segment length clear on both sides (and at least the
    smoothing radius). At the default 0.35 its edges lie beyond the suppression
    radius around every real transition, so they never displace one.
    """
    if spec.distractor_rate == 0.0:
        return 0
    outsiders = [label for label in spec.action_classes if label not in set(labels)]
    if not outsiders:
        logger.warning("%s: every class occurs in the transcript; no distractors added", name)
        return 0
    radius = spec.smoothing_radius
    mean_length = float(np.sum(lengths)) / len(lengths)
    events = 0
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    for label, start, length in zip(labels, starts, lengths):
        if rng.random() >= spec.distractor_rate:
            continue
        length = int(length)
        width = max(1, radius, int(length * rng.uniform(0.1, 0.3)))
        margin = max(radius, int(np.ceil(spec.distractor_clearance * max(length, mean_length))))
        room = length - 2 * margin - width + 1
        if room < 1:
            logger.debug("%s: segment of %d frames too short for a distractor", name, length)
            continue
        first = int(start) + margin + int(rng.integers(0, room))
        distractor = int(rng.choice(outsiders))
        window = slice(first, first + width)
        probabilities[window, label - 1] = 1.0 - spec.distractor_strength
        probabilities[window, distractor - 1] = spec.distractor_strength
        events += 1
    return events


def cross_fade(probabilities: np.ndarray, radius: int) -> None:
    """Linear blend spanning ``radius`` frames centred on every change point.

    Change points must lie at least ``radius`` frames apart and from the ends.
    """
    if radius == 0:
        return
    weights = ((np.arange(radius) + 0.5) / radius)[:, None]
    changes = np.flatnonzero(np.any(probabilities[1:] != probabilities[:-1], axis=1)) + 1
    for change in changes:
        left = probabilities[change - 1].copy()
        right = probabilities[change].copy()
        first = change - radius // 2
        probabilities[first : first + radius] = (1.0 - weights) * left + weights * right


def add_confusion(spec: GeneratorSpec, rng: np.random.Generator, probabilities: np.ndarray, truth: np.ndarray) -> None:
    """Move ``confusion`` of each frame's mass to a random distribution over the other classes."""
    if spec.confusion == 0.0:
        return
    frames, classes = probabilities.shape
    noise = rng.dirichlet(np.ones(classes - 1), size=frames)
    off = np.ones((frames, classes), dtype=bool)
    off[np.arange(frames), truth - 1] = False
    leaked = np.zeros_like(probabilities)
    leaked[off] = noise.reshape(-1)
    probabilities *= 1.0 - spec.confusion
    probabilities += spec.confusion * leaked


def generate_video(spec: GeneratorSpec, index: int) -> SyntheticVideo:
    if index < 0:
        raise GeneratorError(f"video index must be >= 0, got {index}")
    rng = video_rng(spec, index)
    name = video_id(index)
    frames = int(rng.integers(spec.frames[0], spec.frames[1] + 1))
    segments = int(rng.integers(spec.actions[0], spec.actions[1] + 1))
    labels, is_background = draw_transcript(spec, rng, segments)
    lengths = draw_lengths(spec, rng, frames, is_background)
    truth = np.repeat(np.asarray(labels, dtype=np.int64), lengths)

    probabilities = np.zeros((frames, spec.classes))
    probabilities[np.arange(frames), truth - 1] = 1.0
    events = add_distractors(spec, rng, probabilities, labels, lengths, name)
    cross_fade(probabilities, spec.smoothing_radius)
    add_confusion(spec, rng, probabilities, truth)

    means = class_means(spec)
    frame_embeddings = means[truth - 1] + spec.embedding_noise * rng.normal(size=(frames, spec.embedding_dim))
    prototypes = means + spec.embedding_noise * rng.normal(size=means.shape)
    present = np.zeros(spec.classes, dtype=bool)
    present[np.asarray(labels) - 1] = True
    occurrence = np.where(present, OCCURRENCE_MARGIN, -OCCURRENCE_MARGIN)
    occurrence = occurrence + OCCURRENCE_NOISE * rng.normal(size=spec.classes)

    logger.debug("%s: T=%d M=%d distractors=%d", name, frames, len(labels), events)
    return SyntheticVideo(
        sequence=ProbabilitySequence(probabilities),
        embeddings=EmbeddingSet(frame_embeddings, prototypes, occurrence),
        transcript=Transcript(tuple(labels), video_id=name),
        truth=PseudoLabels(truth),
    )


def vocabulary(spec: GeneratorSpec) -> dict[int, str]:
    names = {label: f"action_{label:02d}" for label in range(1, spec.classes + 1)}
    if spec.background is not None:
        names[spec.background] = "background"
    return names


def write_video(out_dir: Path, index: int, video: SyntheticVideo) -> dict[str, Any]:
    name = video_id(index)
    files = {
        "probs": f"probs/{name}.bin",
        "frame_embeddings": f"embeddings/{name}.frames.bin",
        "prototypes": f"embeddings/{name}.prototypes.bin",
        "occurrence_logits": f"embeddings/{name}.occurrence.bin",
        "transcript": f"transcripts/{name}.json",
        "labels": f"labels/{name}.json",
    }
    try:
        write_matrix(out_dir / files["probs"], video.sequence.values, PROBS_MAGIC)
        write_matrix(out_dir / files["frame_embeddings"], video.embeddings.frames, EMBEDDING_MAGIC)
        write_matrix(out_dir / files["prototypes"], video.embeddings.prototypes, EMBEDDING_MAGIC)
        write_matrix(out_dir / files["occurrence_logits"], video.embeddings.occurrence_logits[None, :], EMBEDDING_MAGIC)
        write_transcript(out_dir / files["transcript"], video.transcript)
        write_labels(out_dir / files["labels"], name, video.truth)
    except OSError as exc:
        raise GeneratorError(f"{exc.filename or out_dir}: cannot write video {name} ({exc.strerror})") from exc
    return {"id": name, "T": video.sequence.T, "M": video.transcript.M, "files": files}


def generate_corpus(spec: GeneratorSpec, out_dir: Path | str, threads: int = 1) -> dict[str, Any]:
    """Write every video, then the vocabulary, then the manifest last.

    Ground-truth labels live under ``labels/`` apart from ``transcripts/``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def build(index: int) -> dict[str, Any]:
        return write_video(out_dir, index, generate_video(spec, index))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        videos = list(pool.map(build, range(spec.videos)))
    try:
        write_vocabulary(out_dir / "vocabulary.json", vocabulary(spec))
        write_manifest(out_dir / "manifest.json", spec.to_dict(), videos)
    except OSError as exc:
        raise GeneratorError(f"{exc.filename or out_dir}: cannot write corpus metadata ({exc.strerror})") from exc
    logger.info("Generated %d videos in %s", len(videos), out_dir)
    return {"spec": spec.to_dict(), "videos": videos}


def background_fraction(videos: list[SyntheticVideo], background: int) -> float:
    frames = sum(video.truth.T for video in videos)
    hits = sum(int(np.count_nonzero(video.truth.labels == background)) for video in videos)
    return hits / frames if frames else 0.0
