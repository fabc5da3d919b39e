"""End-to-end pseudo-label generation from a probability sequence and a transcript."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from atba.alignment import (
    align_transitions,
    build_cost_matrix,
    combine_scores,
    labels_from_boundaries,
    refine_boundaries,
    score_transitions,
    uniform_labels,
)
from atba.boundary import score_boundaries, select_candidates
from atba.config import Config
from atba.errors import EmptyCandidateError
from atba.model import ProbabilitySequence, PseudoLabels, Transcript

logger = logging.getLogger(__name__)


@dataclass
class Diagnostics:
    """Per-video record of how the pseudo labels were produced.

    Frame positions are reported on the original (not downsampled) time axis.
    ``alignment_cost`` belongs to ``aligned_boundaries``, the matched candidates;
    ``boundaries`` holds them after centre-frame refinement.
    """

    video_id: str | None = None
    frames: int = 0
    processed_frames: int = 0
    actions: int = 0
    candidates: list[int] = field(default_factory=list)
    boundaries: list[int] = field(default_factory=list)
    aligned_boundaries: list[int] = field(default_factory=list)
    alignment_cost: float | None = None
    suppression_radius: int | None = None
    score_fusion: str = "combined"
    fallback: str | None = None

    @property
    def K(self) -> int:
        return len(self.candidates)

    def to_dict(self) -> dict[str, object]:
        payload = asdict(self)
        payload["K"] = self.K
        return payload


@dataclass
class PipelineResult:
    labels: PseudoLabels
    diagnostics: Diagnostics


def downsample_sequence(sequence: ProbabilitySequence, factor: int) -> ProbabilitySequence:
    if factor == 1:
        return sequence
    return ProbabilitySequence(sequence.values[::factor])


def upsample_labels(labels: PseudoLabels, factor: int, frames: int) -> PseudoLabels:
    if factor == 1:
        return labels
    return PseudoLabels(np.repeat(labels.labels, factor)[:frames])


def to_original_frame(frame: int, factor: int) -> int:
    return (frame - 1) * factor + 1


def atba_pipeline(sequence: ProbabilitySequence, transcript: Transcript, config: Config) -> PipelineResult:
    transcript.check_classes(sequence.C)
    factor = config.downsample
    working = downsample_sequence(sequence, factor)
    diagnostics = Diagnostics(
        video_id=transcript.video_id,
        frames=sequence.T,
        processed_frames=working.T,
        actions=transcript.M,
        score_fusion=config.score_fusion,
    )

    if transcript.M == 1:
        labels = PseudoLabels(np.full(sequence.T, transcript.actions[0], dtype=np.int64))
        return PipelineResult(labels, diagnostics)

    boundary_scores = score_boundaries(working, config)
    try:
        candidates = select_candidates(boundary_scores, transcript, config)
    except EmptyCandidateError as exc:
        logger.warning("%s: %s; using uniform segmentation", transcript.video_id or "video", exc)
        diagnostics.fallback = "uniform"
        return PipelineResult(upsample_labels(uniform_labels(transcript, working.T), factor, sequence.T), diagnostics)

    diagnostics.suppression_radius = candidates.radius
    diagnostics.candidates = [to_original_frame(item, factor) for item in candidates.timestamps]
    if candidates.K < transcript.M - 1:
        logger.warning(
            "%s: only %d candidates for %d transitions; using uniform segmentation",
            transcript.video_id or "video",
            candidates.K,
            transcript.M - 1,
        )
        diagnostics.fallback = "uniform"
        return PipelineResult(upsample_labels(uniform_labels(transcript, working.T), factor, sequence.T), diagnostics)

    scores = score_transitions(working, transcript, candidates, config)
    if config.score_fusion == "combined":
        scores = combine_scores(scores, boundary_scores, candidates)
    alignment = align_transitions(build_cost_matrix(scores))
    boundaries = alignment.boundaries
    if config.center_frame_refinement:
        boundaries = refine_boundaries(boundaries, transcript, working)

    diagnostics.alignment_cost = alignment.total_cost
    diagnostics.aligned_boundaries = [to_original_frame(item, factor) for item in alignment.boundaries]
    diagnostics.boundaries = [to_original_frame(item, factor) for item in boundaries]
    logger.debug(
        "%s: K=%d boundaries=%s cost=%.6f",
        transcript.video_id or "video",
        candidates.K,
        diagnostics.boundaries,
        alignment.total_cost,
    )
    labels = labels_from_boundaries(boundaries, transcript, working.T)
    return PipelineResult(upsample_labels(labels, factor, sequence.T), diagnostics)
