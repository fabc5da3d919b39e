"""Class-agnostic boundary scoring and greedy candidate selection.

Each frame is scored by correlating a sign template against the local
pairwise similarity matrix of its neighbourhood, where similarity is
``1 - 2 * JS`` with base-2 Jensen-Shannon divergence. Candidates are then
picked greedily with non-maximum suppression.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from atba.config import Config
from atba.errors import ConfigError, EmptyCandidateError, NoTransitionError, ValidationError
from atba.model import BoundaryScoreSeries, CandidateSet, ProbabilitySequence, Transcript

logger = logging.getLogger(__name__)

NORMALIZATIONS = ("area", "support")


def check_window(size: int, name: str = "w_b") -> int:
    if not isinstance(size, (int, np.integer)) or size < 3 or size % 2 == 0:
        raise ConfigError(f"{name} must be an odd integer >= 3, got {size!r}")
    return int(size)


def js_divergence(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Base-2 Jensen-Shannon divergence along the last axis, in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    nats = 0.5 * rel_entr(p, m).sum(axis=-1) + 0.5 * rel_entr(q, m).sum(axis=-1)
    return np.clip(nats / math.log(2.0), 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError("similarity matrix must be square")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class BoundaryTemplate:
    values: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


def boundary_template(w_b: int) -> BoundaryTemplate:
    """Sign-product template: +1 diagonal blocks, -1 off-diagonal blocks, zero centre cross."""
    w_b = check_window(w_b)
    offsets = np.sign(np.arange(w_b) - w_b // 2)
    values = np.outer(offsets, offsets).astype(np.float64)
    values.flags.writeable = False
    return BoundaryTemplate(values)


def window_frames(center: int, window: int) -> np.ndarray:
    """1-based frame indices of a window centred at ``center`` (before clamping)."""
    return center - window // 2 + np.arange(window)


def pairwise_similarity(sequence: ProbabilitySequence, center: int, window: int) -> SimilarityMatrix:
    window = check_window(window)
    if not 1 <= center <= sequence.T:
        raise IndexError(f"center frame {center} outside [1, {sequence.T}]")
    rows = sequence.frames(window_frames(center, window))
    divergence = js_divergence(rows[:, None, :], rows[None, :, :])
    values = 1.0 - 2.0 * divergence
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(values)


def _padded(sequence: ProbabilitySequence, half: int) -> np.ndarray:
    return sequence.frames(np.arange(1 - half, sequence.T + half + 1))


def score_boundaries(
    sequence: ProbabilitySequence,
    config: Config,
    normalization: str | None = None,
) -> BoundaryScoreSeries:
    """Correlate the boundary template with every frame's similarity matrix.

    ``normalization="area"`` (the config default) divides by w_b² including the zero cells;
    ``"support"`` divides by the number of non-zero template cells instead.
    """
    normalization = normalization or config.boundary_normalization
    if normalization not in NORMALIZATIONS:
        raise ConfigError(f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}")
    w_b = check_window(config.w_b)
    half = w_b // 2
    template = boundary_template(w_b).values
    padded = _padded(sequence, half)
    frames = sequence.T

    # Padded row s (0-based) holds frame s + 1 - half, so frame t spans padded rows t-1 .. t-1+2*half.
    divergence_at_offset = {
        offset: js_divergence(padded[:-offset], padded[offset:]) for offset in range(1, w_b)
    }
    # The template sums to zero and Γ has a unit diagonal, so only off-diagonal divergences remain.
    total = np.zeros(frames, dtype=np.float64)
    for i in range(w_b):
        for j in range(i + 1, w_b):
            weight = template[i, j]
            if weight:
                total += weight * divergence_at_offset[j - i][i : i + frames]
    denominator = w_b * w_b if normalization == "area" else int(np.count_nonzero(template))
    scores = np.clip(-4.0 * total / denominator, -1.0, 1.0)
    return BoundaryScoreSeries(scores)


def suppression_radius(frames: int, actions: int, mu: float) -> int:
    return int(math.floor(mu * frames / actions + 1e-9))


def greedy_nms(scores: np.ndarray, radius: int, cap: int | None) -> list[int]:
    """Pick 1-based frames by descending score; ties go to the smaller frame.

    Frame 1 is never eligible. Each pick invalidates every frame within
    ``radius`` of it, inclusive. Returns frames in selection order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    frames = scores.size
    valid = np.ones(frames + 1, dtype=bool)
    valid[0] = False
    valid[1] = False
    order = np.lexsort((np.arange(1, frames + 1), -scores)) + 1
    picked: list[int] = []
    for frame in order:
        if cap is not None and len(picked) >= cap:
            break
        if not valid[frame]:
            continue
        picked.append(int(frame))
        valid[max(1, frame - radius) : min(frames, frame + radius) + 1] = False
    return picked


def select_candidates(scores: BoundaryScoreSeries, transcript: Transcript, config: Config) -> CandidateSet:
    if transcript.M < 2:
        raise NoTransitionError("candidate selection needs at least two actions in the transcript")
    if scores.T < 2:
        raise EmptyCandidateError(f"no selectable timestamp in a sequence of {scores.T} frame(s)")
    radius = suppression_radius(scores.T, transcript.M, config.mu)
    cap = None if config.unbounded_candidates else config.lam * (transcript.M - 1)
    picked = greedy_nms(scores.scores, radius, cap)
    logger.debug("Selected %d candidates (radius=%d, cap=%s)", len(picked), radius, cap)
    return CandidateSet(tuple(sorted(picked)), radius=radius)
