"""Benchmark and ablation suites.

Each suite returns a ``BenchResult`` holding table rows plus a few derived
figures. Timings are medians of ``time.perf_counter`` over repeated calls after
one warm-up call. Randomized suites are seeded and reproducible.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from tabulate import tabulate

from atba.alignment import align_transitions, build_cost_matrix, combine_scores, score_transitions
from atba.boundary import score_boundaries
from atba.config import Config
from atba.errors import ConfigError
from atba.evaluation import pseudo_label_accuracy
from atba.model import CandidateSet, ProbabilitySequence, TransitionScoreMatrix, Transcript
from atba.oracles import brute_force_alignment, class_agnostic_baseline, exhaustive_segmentation_aligner, matching_cost
from atba.pipeline import atba_pipeline
from atba.synthetic import GeneratorSpec, SyntheticVideo, generate_video

logger = logging.getLogger(__name__)


@dataclass
class BenchResult:
    suite: str
    rows: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def table(self, tablefmt: str = "github") -> str:
        text = tabulate(self.rows, headers="keys", tablefmt=tablefmt, floatfmt=".4f")
        if self.summary:
            text += "\n\n" + tabulate(sorted(self.summary.items()), headers=["figure", "value"], tablefmt=tablefmt)
        return text

    def to_dict(self) -> dict[str, Any]:
        return {"suite": self.suite, "rows": self.rows, "summary": self.summary}


def time_call(function: Callable[[], Any], repeats: int = 5) -> float:
    function()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        function()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def random_sequence(rng: np.random.Generator, frames: int, classes: int) -> ProbabilitySequence:
    return ProbabilitySequence(rng.dirichlet(np.ones(classes), size=frames))


def random_transcript(rng: np.random.Generator, actions: int, classes: int) -> Transcript:
    labels: list[int] = []
    for _ in range(actions):
        options = [label for label in range(1, classes + 1) if not labels or label != labels[-1]]
        labels.append(int(rng.choice(options)))
    return Transcript(tuple(labels))


def random_scores(rng: np.random.Generator, candidates: int, transitions: int) -> TransitionScoreMatrix:
    timestamps = CandidateSet(tuple(range(2, candidates + 2)))
    return TransitionScoreMatrix(rng.uniform(-1.0, 1.0, size=(candidates, transitions)), timestamps)


def alignment_step(sequence: ProbabilitySequence, transcript: Transcript, candidates: CandidateSet, config: Config):
    """Everything after boundary scoring: transition scores, fusion and the dynamic program."""
    boundary = score_boundaries(sequence, config)

    def run() -> Any:
        scores = combine_scores(score_transitions(sequence, transcript, candidates, config), boundary, candidates)
        return align_transitions(build_cost_matrix(scores))

    return run


def alignment_scaling(
    *,
    seed: int = 0,
    frames: tuple[int, ...] = (1_000, 10_000, 100_000),
    candidates: int = 40,
    actions: int = 11,
    classes: int = 12,
    repeats: int = 5,
    **_: Any,
) -> BenchResult:
    """Alignment time should stay flat in T while boundary scoring grows linearly."""
    rng = np.random.default_rng(seed)
    config = Config()
    transcript = random_transcript(rng, actions, classes)
    result = BenchResult("alignment-scaling")
    for count in frames:
        sequence = random_sequence(rng, count, classes)
        step = count // (candidates + 1)
        timestamps = CandidateSet(tuple(step * (k + 1) for k in range(candidates)))
        scoring = time_call(lambda: score_boundaries(sequence, config), repeats)
        aligning = time_call(alignment_step(sequence, transcript, timestamps, config), repeats)
        result.rows.append({"T": count, "K": candidates, "M": actions, "scoring_s": scoring, "alignment_s": aligning})
        logger.info("alignment-scaling T=%d scoring=%.4fs alignment=%.6fs", count, scoring, aligning)

    times = {row["T"]: row["alignment_s"] for row in result.rows}
    if len(frames) >= 2:
        slope = np.polyfit(np.log([row["T"] for row in result.rows]), np.log([row["scoring_s"] for row in result.rows]), 1)[0]
        result.summary["scoring_loglog_slope"] = float(slope)
        largest, second = sorted(times)[-1], sorted(times)[-2]
        result.summary["alignment_ratio_largest_vs_next"] = times[largest] / times[second]
    return result


def oracle_equivalence(
    *,
    seed: int = 0,
    instances: int = 1000,
    max_candidates: int = 12,
    max_actions: int = 6,
    **_: Any,
) -> BenchResult:
    """Compare the dynamic program with exhaustive enumeration on random score matrices."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    costs_equal = unique = matchings_equal = 0
    failures: list[dict[str, Any]] = []
    for index in range(instances):
        actions = int(rng.integers(2, max_actions + 1))
        candidates = int(rng.integers(max(1, actions - 1), max_candidates + 1))
        scores = random_scores(rng, candidates, actions - 1)
        fast = align_transitions(build_cost_matrix(scores))
        slow = brute_force_alignment(scores)
        optimal = sum(
            1
            for rows in itertools.combinations(range(candidates), actions - 1)
            if matching_cost(scores, rows) == slow.total_cost
        )
        costs_equal += fast.total_cost == slow.total_cost
        if optimal == 1:
            unique += 1
            matchings_equal += fast.matched_indices == slow.matched_indices
        if fast.total_cost != slow.total_cost or fast.matched_indices != slow.matched_indices:
            failures.append({"instance": index, "K": candidates, "M": actions, "dp": fast.total_cost, "brute": slow.total_cost})
    elapsed = time.perf_counter() - start
    result = BenchResult("oracle-equivalence", rows=failures[:20])
    result.summary.update(
        {
            "instances": instances,
            "costs_equal": int(costs_equal),
            "unique_optima": unique,
            "matchings_equal_when_unique": int(matchings_equal),
            "seconds": elapsed,
        }
    )
    logger.info("oracle-equivalence: %d/%d costs equal in %.2fs", costs_equal, instances, elapsed)
    return result


def _corpus(spec: GeneratorSpec, threads: int) -> list[SyntheticVideo]:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(lambda index: generate_video(spec, index), range(spec.videos)))


def _mean_accuracy(videos: list[SyntheticVideo], runner: Callable[[SyntheticVideo], Any], threads: int) -> float:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        scores = list(pool.map(lambda video: pseudo_label_accuracy(runner(video).labels, video.truth), videos))
    return float(np.mean(scores))


def ablation(*, seed: int = 0, videos: int = 200, threads: int = 1, **_: Any) -> BenchResult:
    """Class-agnostic baseline vs transition-only alignment vs full fusion on a distractor corpus."""
    corpus = _corpus(GeneratorSpec.profile("distractor", seed=seed, videos=videos), threads)
    variants = {
        "class-agnostic": lambda video, config=Config(): class_agnostic_baseline(video.sequence, video.transcript, config),
        "transition-only": lambda video, config=Config(score_fusion="transition-only"): atba_pipeline(
            video.sequence, video.transcript, config
        ),
        "combined": lambda video, config=Config(): atba_pipeline(video.sequence, video.transcript, config),
    }
    result = BenchResult("ablation")
    for name, runner in variants.items():
        accuracy = _mean_accuracy(corpus, runner, threads)
        result.rows.append({"variant": name, "videos": len(corpus), "pl_mean": accuracy})
        result.summary[f"pl_{name}"] = accuracy
        logger.info("ablation %s: P.L. %.2f", name, accuracy)
    return result


SENSITIVITY_GRID: dict[str, tuple[Any, ...]] = {
    "w_b": (3, 5, 7, 9, 11),
    "w_a": (15, 23, 31, 41),
    "lam": (1, 2, 4, 8, math.inf),
    "mu": (0.0, 0.1, 0.2, 0.3, 0.5),
}


def sensitivity(*, seed: int = 0, videos: int = 40, threads: int = 1, **_: Any) -> BenchResult:
    """Pseudo-label accuracy while sweeping one hyperparameter at a time."""
    corpus = _corpus(GeneratorSpec.profile("distractor", seed=seed, videos=videos), threads)
    result = BenchResult("sensitivity")
    for name, values in SENSITIVITY_GRID.items():
        for value in values:
            if value == math.inf:
                config = Config(unbounded_candidates=True)
            else:
                config = Config().with_overrides(**{name: value})
            accuracy = _mean_accuracy(
                corpus, lambda video, config=config: atba_pipeline(video.sequence, video.transcript, config), threads
            )
            result.rows.append({"parameter": name, "value": "inf" if value == math.inf else value, "pl_mean": accuracy})
    return result


def oracle_timing(*, seed: int = 0, frames: int = 2000, actions: int = 8, repeats: int = 3, **_: Any) -> BenchResult:
    """O(T²M) segmentation oracle against the alignment step on one video."""
    spec = GeneratorSpec(seed=seed, videos=1, frames=(frames, frames), actions=(actions, actions), classes=12, min_segment_length=64)
    video = generate_video(spec, 0)
    config = Config()
    pipeline = atba_pipeline(video.sequence, video.transcript, config)
    candidates = CandidateSet(tuple(pipeline.diagnostics.candidates)) if pipeline.diagnostics.candidates else None
    if candidates is None or candidates.K < actions - 1:
        raise ConfigError("oracle-timing video produced too few candidates; choose another seed")
    aligning = time_call(alignment_step(video.sequence, video.transcript, candidates, config), repeats)
    oracle = time_call(lambda: exhaustive_segmentation_aligner(video.sequence, video.transcript), max(1, repeats // 3))
    result = BenchResult("oracle-timing")
    result.rows.append({"method": "exhaustive segmentation (O(T^2 M))", "T": frames, "M": actions, "seconds": oracle})
    result.rows.append({"method": "drop-allowed alignment (O(KM))", "T": frames, "M": actions, "seconds": aligning})
    result.summary["speedup"] = oracle / aligning if aligning > 0 else math.inf
    return result


def template_variant(*, seed: int = 0, videos: int = 40, threads: int = 1, **_: Any) -> BenchResult:
    """Template normalized by w_b² (zero cells included) against the non-zero cell count."""
    corpus = _corpus(GeneratorSpec.profile("distractor", seed=seed, videos=videos), threads)
    result = BenchResult("template-variant")
    for normalization in ("area", "support"):
        config = Config(boundary_normalization=normalization)
        peaks = [float(np.max(score_boundaries(video.sequence, config).scores)) for video in corpus]
        accuracy = _mean_accuracy(
            corpus, lambda video, config=config: atba_pipeline(video.sequence, video.transcript, config), threads
        )
        result.rows.append({"normalization": normalization, "mean_peak_score": float(np.mean(peaks)), "pl_mean": accuracy})
    return result


SUITES: dict[str, Callable[..., BenchResult]] = {
    "alignment-scaling": alignment_scaling,
    "oracle-equivalence": oracle_equivalence,
    "ablation": ablation,
    "sensitivity": sensitivity,
    "oracle-timing": oracle_timing,
    "template-variant": template_variant,
}


def run_suite(name: str, **options: Any) -> BenchResult:
    try:
        suite = SUITES[name]
    except KeyError:
        raise ConfigError(f"unknown bench suite {name!r}; expected one of {sorted(SUITES)}") from None
    logger.info("Running bench suite %s", name)
    return suite(**options)
