"""Frame and segment metrics for action segmentation.

All percentages are on a 0-100 scale. Corpus figures pool frames across videos
(MoF, MoF-Bg, frame-weighted pseudo-label accuracy) or average over every
ground-truth segment in the corpus (IoU, IoD).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from atba.errors import UndefinedMetricError, ValidationError
from atba.model import ProbabilitySequence, PseudoLabels, Segmentation, segmentation_from_labels

logger = logging.getLogger(__name__)


def _check_lengths(predicted: PseudoLabels, truth: PseudoLabels) -> None:
    if predicted.T != truth.T:
        raise ValidationError(f"predicted labels cover {predicted.T} frames but ground truth covers {truth.T}")


def predict_labels(sequence: ProbabilitySequence) -> PseudoLabels:
    """Alignment-free inference: the most probable class per frame, ties to the smaller index."""
    return PseudoLabels(np.argmax(sequence.values, axis=1) + 1)


def mof(predicted: PseudoLabels, truth: PseudoLabels) -> float:
    _check_lengths(predicted, truth)
    return 100.0 * float(np.count_nonzero(predicted.labels == truth.labels)) / truth.T


def mof_bg(predicted: PseudoLabels, truth: PseudoLabels, background: int) -> float:
    _check_lengths(predicted, truth)
    foreground = truth.labels != background
    count = int(np.count_nonzero(foreground))
    if count == 0:
        raise UndefinedMetricError(f"MoF-Bg is undefined: every ground-truth frame is background class {background}")
    correct = np.count_nonzero(predicted.labels[foreground] == truth.labels[foreground])
    return 100.0 * float(correct) / count


def pseudo_label_accuracy(pseudo: PseudoLabels, truth: PseudoLabels) -> float:
    return mof(pseudo, truth)


@dataclass(frozen=True)
class SegmentOverlap:
    label: int
    start: int
    end: int
    iou: float
    iod: float


def iou_iod_per_segment(predicted: Segmentation, truth: Segmentation) -> list[SegmentOverlap]:
    """Best same-class IoU and IoD for each ground-truth segment, as fractions."""
    if predicted.T != truth.T:
        raise ValidationError(f"predicted segmentation covers {predicted.T} frames but ground truth covers {truth.T}")
    overlaps = []
    for target in truth.segments:
        best_iou = best_iod = 0.0
        for segment in predicted.segments:
            if segment.label != target.label:
                continue
            intersection = min(segment.end, target.end) - max(segment.start, target.start) + 1
            if intersection <= 0:
                continue
            union = segment.length + target.length - intersection
            best_iou = max(best_iou, intersection / union)
            best_iod = max(best_iod, intersection / segment.length)
        overlaps.append(SegmentOverlap(target.label, target.start, target.end, best_iou, best_iod))
    return overlaps


def iou_iod(predicted: Segmentation, truth: Segmentation) -> tuple[float, float]:
    overlaps = iou_iod_per_segment(predicted, truth)
    iou = 100.0 * float(np.mean([item.iou for item in overlaps]))
    iod = 100.0 * float(np.mean([item.iod for item in overlaps]))
    return iou, iod


def corpus_pseudo_label_accuracy(pairs: Iterable[tuple[PseudoLabels, PseudoLabels]]) -> tuple[float, float]:
    """Return (frame-weighted, video-averaged) accuracy over (pseudo, truth) pairs."""
    correct = frames = 0
    per_video = []
    for pseudo, truth in pairs:
        _check_lengths(pseudo, truth)
        hits = int(np.count_nonzero(pseudo.labels == truth.labels))
        correct += hits
        frames += truth.T
        per_video.append(100.0 * hits / truth.T)
    if not per_video:
        raise UndefinedMetricError("pseudo-label accuracy is undefined for an empty corpus")
    return 100.0 * correct / frames, float(np.mean(per_video))


@dataclass
class VideoMetrics:
    video_id: str
    frames: int
    mof: float
    mof_bg: float | None
    iou: float
    iod: float


@dataclass
class CorpusReport:
    videos: int
    frames: int
    mof: float
    mof_bg: float | None
    iou: float
    iod: float
    pl: float
    pl_video_average: float
    per_video: list[VideoMetrics] = field(default_factory=list)

    def summary(self) -> dict[str, object]:
        return {
            "videos": self.videos,
            "frames": self.frames,
            "MoF": self.mof,
            "MoF-Bg": self.mof_bg,
            "IoU": self.iou,
            "IoD": self.iod,
            "P.L.": self.pl,
            "P.L. (video-averaged)": self.pl_video_average,
        }


class MetricAccumulator:
    """Running totals over a corpus; ``report()`` reduces them in insertion-independent form."""

    def __init__(self, background: int | None = None) -> None:
        self.background = background
        self.correct = 0
        self.total = 0
        self.foreground_correct = 0
        self.foreground_total = 0
        self.overlaps: dict[str, list[SegmentOverlap]] = {}
        self.videos: dict[str, VideoMetrics] = {}

    def update(self, video_id: str, predicted: PseudoLabels, truth: PseudoLabels) -> VideoMetrics:
        if video_id in self.videos:
            raise ValidationError(f"video {video_id!r} was already evaluated")
        _check_lengths(predicted, truth)
        hits = predicted.labels == truth.labels
        self.correct += int(np.count_nonzero(hits))
        self.total += truth.T

        video_bg = None
        if self.background is not None:
            foreground = truth.labels != self.background
            count = int(np.count_nonzero(foreground))
            self.foreground_correct += int(np.count_nonzero(hits[foreground]))
            self.foreground_total += count
            if count:
                video_bg = 100.0 * float(np.count_nonzero(hits[foreground])) / count

        overlaps = iou_iod_per_segment(segmentation_from_labels(predicted), segmentation_from_labels(truth))
        self.overlaps[video_id] = overlaps
        metrics = VideoMetrics(
            video_id=video_id,
            frames=truth.T,
            mof=100.0 * float(np.count_nonzero(hits)) / truth.T,
            mof_bg=video_bg,
            iou=100.0 * float(np.mean([item.iou for item in overlaps])),
            iod=100.0 * float(np.mean([item.iod for item in overlaps])),
        )
        self.videos[video_id] = metrics
        return metrics

    def report(self) -> CorpusReport:
        if not self.videos:
            raise UndefinedMetricError("cannot report metrics for an empty corpus")
        mof_bg_value = None
        if self.background is not None:
            if self.foreground_total:
                mof_bg_value = 100.0 * self.foreground_correct / self.foreground_total
            else:
                logger.warning("MoF-Bg undefined: no non-background ground-truth frames in the corpus")
        per_video = [self.videos[key] for key in sorted(self.videos)]
        pooled = [item for key in sorted(self.overlaps) for item in self.overlaps[key]]
        pl = 100.0 * self.correct / self.total
        return CorpusReport(
            videos=len(per_video),
            frames=self.total,
            mof=pl,
            mof_bg=mof_bg_value,
            iou=100.0 * float(np.mean([item.iou for item in pooled])),
            iod=100.0 * float(np.mean([item.iod for item in pooled])),
            pl=pl,
            pl_video_average=float(np.mean([item.mof for item in per_video])),
            per_video=per_video,
        )


def evaluate_corpus(
    predictions: Mapping[str, PseudoLabels],
    truths: Mapping[str, PseudoLabels],
    background: int | None = None,
) -> CorpusReport:
    missing_truth = sorted(set(predictions) - set(truths))
    missing_pred = sorted(set(truths) - set(predictions))
    errors = []
    if missing_truth:
        errors.append(f"no ground truth for videos: {', '.join(missing_truth)}")
    if missing_pred:
        errors.append(f"no predictions for videos: {', '.join(missing_pred)}")
    if errors:
        raise ValidationError("\n".join(errors))
    accumulator = MetricAccumulator(background)
    for video_id in sorted(truths):
        accumulator.update(video_id, predictions[video_id], truths[video_id])
    return accumulator.report()
