"""Transition scoring and drop-allowed alignment of candidates to transitions.

The aligner matches the M-1 transitions of a transcript, in order, to a
superset of K candidate boundaries. Surplus candidates are matched to an empty
symbol interleaved between transitions, which turns the problem into a
monotone path through a K×(2(M-1)+1) cost matrix solved row by row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from atba.boundary import check_window, window_frames
from atba.config import Config
from atba.errors import InfeasibleAlignmentError, NoTransitionError, ValidationError
from atba.model import (
    AlignmentResult,
    BoundaryScoreSeries,
    CandidateSet,
    ProbabilitySequence,
    PseudoLabels,
    TransitionScoreMatrix,
    Transcript,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransitionTemplate:
    values: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values.shape[1])


def transition_template(w_a: int) -> TransitionTemplate:
    """Row 1 tracks the outgoing class (+1 before, -1 after), row 2 the incoming class."""
    w_a = check_window(w_a, "w_a")
    outgoing = -np.sign(np.arange(w_a) - w_a // 2).astype(np.float64)
    values = np.vstack((outgoing, -outgoing))
    values.flags.writeable = False
    return TransitionTemplate(values)


def score_transitions(
    sequence: ProbabilitySequence,
    transcript: Transcript,
    candidates: CandidateSet,
    config: Config,
) -> TransitionScoreMatrix:
    if transcript.M < 2:
        raise NoTransitionError("transition scoring needs at least two actions in the transcript")
    if candidates.K < 1:
        raise ValidationError("transition scoring needs at least one candidate")
    transcript.check_classes(sequence.C)
    template = transition_template(config.w_a).values
    frames = candidates.as_array()[:, None] + window_frames(0, config.w_a)[None, :]
    windows = sequence.frames(frames)  # K × w_a × C
    outgoing = np.asarray(transcript.actions[:-1]) - 1
    incoming = np.asarray(transcript.actions[1:]) - 1
    values = np.einsum("kjr,j->kr", windows[:, :, outgoing], template[0])
    values += np.einsum("kjr,j->kr", windows[:, :, incoming], template[1])
    return TransitionScoreMatrix(values / (2 * config.w_a), candidates)


def combine_scores(
    transition: TransitionScoreMatrix,
    boundary: BoundaryScoreSeries,
    candidates: CandidateSet,
) -> TransitionScoreMatrix:
    """Add each candidate's class-agnostic score to its whole row of transition scores."""
    if candidates.K != transition.K or candidates.timestamps != transition.candidates.timestamps:
        raise ValidationError(
            f"candidate set ({candidates.K}) does not index the transition matrix ({transition.K} rows)"
        )
    if candidates.K and candidates.timestamps[-1] > boundary.T:
        raise ValidationError(
            f"candidate frame {candidates.timestamps[-1]} exceeds boundary series length {boundary.T}"
        )
    lifted = transition.values + boundary.at(candidates.timestamps)[:, None]
    return TransitionScoreMatrix(lifted, candidates)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Expanded cost matrix; column 2r-1 (1-based) drops, column 2r matches transition r.

    ``masked`` marks positions no monotone path can reach; they start at +inf.
    """

    values: np.ndarray
    masked: np.ndarray
    candidates: CandidateSet

    @property
    def K(self) -> int:
        return int(self.values.shape[0])

    @property
    def transitions(self) -> int:
        return (int(self.values.shape[1]) - 1) // 2

    def initial(self) -> np.ndarray:
        return np.where(self.masked, np.inf, self.values)


def build_cost_matrix(scores: TransitionScoreMatrix) -> CostMatrix:
    transitions = scores.transitions
    if transitions < 1:
        raise NoTransitionError("cost matrix needs at least one transition")
    candidates = scores.K
    if candidates < transitions:
        raise InfeasibleAlignmentError(
            f"{candidates} candidates cannot cover {transitions} transitions"
        )
    values = np.zeros((candidates, 2 * transitions + 1), dtype=np.float64)
    values[:, 1::2] = -scores.values
    drops = candidates - transitions
    masked = np.zeros(values.shape, dtype=bool)
    masked[drops:, 0] = True
    masked[drops + 1 :, 1] = True
    masked[0, 2:] = True
    values.flags.writeable = False
    masked.flags.writeable = False
    return CostMatrix(values, masked, scores.candidates)


def cumulative_costs(cost: CostMatrix) -> np.ndarray:
    """Fill the cumulative matrix D; rows depend serially on the previous row."""
    delta = cost.values
    rows, columns = delta.shape
    cumulative = np.full((rows, columns), np.inf)
    cumulative[:, :2] = cost.initial()[:, :2]
    cumulative[0, 2:] = np.inf
    # 0-based even columns are drops, odd columns are transitions.
    drop_columns = np.arange(2, columns, 2)
    match_columns = np.arange(3, columns, 2)
    for row in range(1, rows):
        previous = cumulative[row - 1]
        cumulative[row, drop_columns] = delta[row, drop_columns] + np.minimum(
            previous[drop_columns], previous[drop_columns - 1]
        )
        cumulative[row, match_columns] = delta[row, match_columns] + np.minimum(
            previous[match_columns - 1], previous[match_columns - 2]
        )
    return cumulative


def align_transitions(cost: CostMatrix) -> AlignmentResult:
    """Minimum-cost monotone matching of every transition to one candidate.

    Backtracking breaks ties towards the drop column, so among equal-cost
    matchings the one dropping the latest candidates wins.
    """
    cumulative = cumulative_costs(cost)
    rows, columns = cumulative.shape
    last = columns - 1
    total = float(min(cumulative[rows - 1, last - 1], cumulative[rows - 1, last]))
    if not np.isfinite(total):
        raise InfeasibleAlignmentError("no valid alignment path reaches the final row")

    matched: list[int] = []
    column = last
    for row in range(rows - 1, -1, -1):
        if column % 2 == 0:
            options = (column, column - 1)
        else:
            options = (column - 1, column - 2)
        stay, move = options
        if move < 0 or cumulative[row, stay] <= cumulative[row, move]:
            column = stay
        else:
            column = move
        if column % 2 == 1:
            matched.append(row)
    matched.reverse()
    if len(matched) != cost.transitions:
        raise InfeasibleAlignmentError(
            f"backtracking matched {len(matched)} candidates for {cost.transitions} transitions"
        )
    timestamps = cost.candidates.timestamps
    return AlignmentResult(
        boundaries=tuple(timestamps[row] for row in matched),
        total_cost=total,
        matched_indices=tuple(row + 1 for row in matched),
    )


def labels_from_boundaries(boundaries: tuple[int, ...] | list[int], transcript: Transcript, frames: int) -> PseudoLabels:
    """Fill the intervals between boundaries with the transcript in order.

    A boundary frame starts the incoming segment.
    """
    boundaries = [int(item) for item in boundaries]
    if len(boundaries) != transcript.M - 1:
        raise ValidationError(f"{len(boundaries)} boundaries for a transcript of {transcript.M} actions")
    edges = [1, *boundaries, frames + 1]
    lengths = np.diff(edges)
    if np.any(lengths < 1):
        raise ValidationError(f"boundaries {boundaries} are not strictly increasing within (1, {frames}]")
    return PseudoLabels(np.repeat(np.asarray(transcript.actions, dtype=np.int64), lengths))


def emit_pseudo_labels(alignment: AlignmentResult, transcript: Transcript, T: int) -> PseudoLabels:
    return labels_from_boundaries(alignment.boundaries, transcript, T)


def uniform_labels(transcript: Transcript, T: int) -> PseudoLabels:
    """Equal-length segments of ⌊T/M⌋ frames with the remainder on the last one."""
    if T < transcript.M:
        logger.warning("Only %d frames for %d actions; keeping the first %d actions", T, transcript.M, T)
        return PseudoLabels(np.asarray(transcript.actions[:T], dtype=np.int64))
    size = T // transcript.M
    lengths = np.full(transcript.M, size)
    lengths[-1] += T - size * transcript.M
    return PseudoLabels(np.repeat(np.asarray(transcript.actions, dtype=np.int64), lengths))


def refine_boundaries(
    boundaries: tuple[int, ...] | list[int],
    transcript: Transcript,
    sequence: ProbabilitySequence,
) -> tuple[int, ...]:
    """Hand an unscored centre frame to the outgoing segment when it prefers that class.

    Both templates carry zero weight on their centre, so a boundary at b and
    at b+1 can tie exactly; the centre frame's own probabilities decide.
    """
    refined: list[int] = []
    edges = [*boundaries, sequence.T + 1]
    for r, frame in enumerate(boundaries):
        outgoing, incoming = transcript.transitions[r]
        row = sequence.values[frame - 1]
        if row[outgoing - 1] > row[incoming - 1] and frame + 1 < edges[r + 1]:
            frame += 1
        refined.append(int(frame))
    return tuple(refined)
