"""Slow reference implementations used to check the fast pipeline.

These enumerate or search exhaustively and refuse inputs above a fixed guard
instead of truncating.
"""

from __future__ import annotations

import itertools
import logging
import math

import numpy as np

from atba.alignment import labels_from_boundaries, refine_boundaries, uniform_labels
from atba.boundary import (
    boundary_template,
    check_window,
    greedy_nms,
    pairwise_similarity,
    score_boundaries,
    suppression_radius,
)
from atba.config import Config
from atba.errors import ConfigError, InfeasibleAlignmentError, NoTransitionError, OracleTooLargeError
from atba.model import (
    AlignmentResult,
    BoundaryScoreSeries,
    ProbabilitySequence,
    PseudoLabels,
    TransitionScoreMatrix,
    Transcript,
)
from atba.pipeline import Diagnostics, PipelineResult, downsample_sequence, to_original_frame, upsample_labels

logger = logging.getLogger(__name__)

MAX_SUBSETS = 1_000_000
MAX_ORACLE_FRAMES = 2000


def matching_cost(scores: TransitionScoreMatrix, rows: tuple[int, ...]) -> float:
    """ψ of a matching given 0-based candidate rows, summed in transition order."""
    cost = 0.0
    for transition, row in enumerate(rows):
        cost = cost + (-scores.values[row, transition])
    return cost


def brute_force_alignment(scores: TransitionScoreMatrix, max_subsets: int = MAX_SUBSETS) -> AlignmentResult:
    """Evaluate every increasing subset of candidates and keep the cheapest.

    Equal costs resolve like the dynamic program: the matching whose last
    index is smallest wins, then the second-to-last, and so on.
    """
    candidates, transitions = scores.K, scores.transitions
    if transitions < 1:
        raise NoTransitionError("alignment needs at least one transition")
    if candidates < transitions:
        raise InfeasibleAlignmentError(f"{candidates} candidates cannot cover {transitions} transitions")
    subsets = math.comb(candidates, transitions)
    if subsets > max_subsets:
        raise OracleTooLargeError(f"C({candidates}, {transitions}) = {subsets} subsets exceeds guard {max_subsets}")

    best_rows: tuple[int, ...] | None = None
    best_key: tuple[float, tuple[int, ...]] | None = None
    for rows in itertools.combinations(range(candidates), transitions):
        key = (matching_cost(scores, rows), rows[::-1])
        if best_key is None or key < best_key:
            best_key, best_rows = key, rows
    assert best_rows is not None and best_key is not None
    timestamps = scores.candidates.timestamps
    return AlignmentResult(
        boundaries=tuple(timestamps[row] for row in best_rows),
        total_cost=best_key[0],
        matched_indices=tuple(row + 1 for row in best_rows),
    )


def log_likelihoods(sequence: ProbabilitySequence) -> np.ndarray:
    """Natural log of P with zeros floored at the smallest positive float."""
    return np.log(np.maximum(sequence.values, np.finfo(np.float64).tiny))


def labeling_log_likelihood(sequence: ProbabilitySequence, labels: PseudoLabels) -> float:
    logs = log_likelihoods(sequence)
    return float(logs[np.arange(sequence.T), labels.labels - 1].sum())


def exhaustive_segmentation_aligner(
    sequence: ProbabilitySequence,
    transcript: Transcript,
    max_frames: int = MAX_ORACLE_FRAMES,
) -> PseudoLabels:
    """Frame-level Viterbi over (frame, segment) states with no length model.

    Maximizes Σ_t log P[t, label_t] over every segmentation that follows the
    transcript with at least one frame per segment. Runs in O(T²M).
    Among equal splits the earliest boundary wins.
    """
    transcript.check_classes(sequence.C)
    frames, segments = sequence.T, transcript.M
    if frames > max_frames:
        raise OracleTooLargeError(f"T={frames} exceeds the segmentation oracle guard of {max_frames} frames")
    if segments == 1:
        return PseudoLabels(np.full(frames, transcript.actions[0], dtype=np.int64))
    if frames < segments:
        raise InfeasibleAlignmentError(f"{frames} frames cannot hold {segments} non-empty segments")

    logs = log_likelihoods(sequence)
    # prefix[m][t] = sum of log P[s, a_m] for s < t, so a segment over frames s..t-1 (0-based) costs prefix[t] - prefix[s]
    prefix = np.zeros((segments, frames + 1))
    prefix[:, 1:] = np.cumsum(logs[:, np.asarray(transcript.actions) - 1].T, axis=1)

    best = np.full((segments, frames + 1), -np.inf)
    back = np.zeros((segments, frames + 1), dtype=np.int64)
    best[0, 1:] = prefix[0, 1:]
    for m in range(1, segments):
        for end in range(m + 1, frames + 1):
            starts = np.arange(m, end)
            totals = best[m - 1, starts] + prefix[m, end] - prefix[m, starts]
            choice = int(np.argmax(totals))
            best[m, end] = totals[choice]
            back[m, end] = starts[choice]

    boundaries = []
    end = frames
    for m in range(segments - 1, 0, -1):
        start = int(back[m, end])
        boundaries.append(start + 1)
        end = start
    boundaries.reverse()
    return labels_from_boundaries(boundaries, transcript, frames)


def class_agnostic_baseline(sequence: ProbabilitySequence, transcript: Transcript, config: Config) -> PipelineResult:
    """Pick exactly M-1 boundaries from class-agnostic scores; no transition alignment."""
    transcript.check_classes(sequence.C)
    factor = config.downsample
    working = downsample_sequence(sequence, factor)
    diagnostics = Diagnostics(
        video_id=transcript.video_id,
        frames=sequence.T,
        processed_frames=working.T,
        actions=transcript.M,
        score_fusion="class-agnostic",
    )
    if transcript.M == 1:
        return PipelineResult(PseudoLabels(np.full(sequence.T, transcript.actions[0], dtype=np.int64)), diagnostics)

    scores = score_boundaries(working, config)
    radius = suppression_radius(working.T, transcript.M, config.mu)
    picked = sorted(greedy_nms(scores.scores, radius, transcript.M - 1)) if working.T >= 2 else []
    diagnostics.suppression_radius = radius
    diagnostics.candidates = [to_original_frame(item, factor) for item in picked]
    if len(picked) < transcript.M - 1:
        logger.warning(
            "%s: only %d boundaries for %d transitions; using uniform segmentation",
            transcript.video_id or "video",
            len(picked),
            transcript.M - 1,
        )
        diagnostics.fallback = "uniform"
        return PipelineResult(upsample_labels(uniform_labels(transcript, working.T), factor, sequence.T), diagnostics)

    boundaries = tuple(picked)
    if config.center_frame_refinement:
        boundaries = refine_boundaries(boundaries, transcript, working)
    diagnostics.aligned_boundaries = list(diagnostics.candidates)
    diagnostics.boundaries = [to_original_frame(item, factor) for item in boundaries]
    labels = labels_from_boundaries(boundaries, transcript, working.T)
    return PipelineResult(upsample_labels(labels, factor, sequence.T), diagnostics)


def brute_force_boundary_scores(
    sequence: ProbabilitySequence,
    config: Config,
    normalization: str | None = None,
) -> BoundaryScoreSeries:
    """Correlate the template with an explicitly built similarity matrix at every frame."""
    w_b = check_window(config.w_b)
    template = boundary_template(w_b).values
    normalization = normalization or config.boundary_normalization
    if normalization == "area":
        denominator = w_b * w_b
    elif normalization == "support":
        denominator = int(np.count_nonzero(template))
    else:
        raise ConfigError(f"unknown normalization {normalization!r}")
    scores = np.empty(sequence.T)
    for frame in range(1, sequence.T + 1):
        similarity = pairwise_similarity(sequence, frame, w_b).values
        scores[frame - 1] = float(np.sum(template * similarity)) / denominator
    return BoundaryScoreSeries(np.clip(scores, -1.0, 1.0))
