#!/usr/bin/env python3
"""Command-line entry point for boundary alignment.

DESCRIPTION:
    generate   write a seeded synthetic corpus
    score      print class-agnostic boundary scores for one probability file
    align      produce pseudo labels for one video or a whole corpus
    evaluate   MoF, MoF-Bg, IoU, IoD and pseudo-label accuracy against ground truth
    bench      timing, equivalence and ablation suites

USAGE:
    python -m atba generate --spec spec.json --out corpus/
    python -m atba align --corpus corpus/ --out pseudo/ --threads 4
    python -m atba evaluate --pred pseudo/labels --truth corpus/labels --background 1
    python -m atba --format json bench --suite oracle-equivalence --out bench.json

Errors are written to stderr as one JSON object and the exit code is 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

from tabulate import tabulate

from atba.bench import SUITES, run_suite
from atba.boundary import score_boundaries, select_candidates
from atba.config import Config, PRESETS, load_config
from atba.errors import AtbaError, ConfigError, SchemaError, UnsupportedVersionError, ValidationError
from atba.evaluation import evaluate_corpus, predict_labels, pseudo_label_accuracy
from atba.fileio import (
    FORMAT_VERSION,
    load_label_directory,
    load_probability_directory,
    read_labels,
    read_manifest,
    read_probabilities,
    read_transcript,
    write_document,
    write_labels,
)
from atba.model import ProbabilitySequence, Transcript, segmentation_from_labels
from atba.oracles import class_agnostic_baseline, exhaustive_segmentation_aligner
from atba.pipeline import Diagnostics, PipelineResult, atba_pipeline
from atba.synthetic import GeneratorSpec, generate_corpus

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
BASELINES = ("class-agnostic", "viterbi-oracle")


def configure_logging(level: str, log_file: str | None = None) -> None:
    if not isinstance(logging.getLevelName(level.upper()), int):
        raise ConfigError(f"unknown log level {level!r}")
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, handlers=handlers, force=True)


def emit(payload: dict[str, Any], fmt: str, text: Callable[[], str]) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text())


def resolve_config(args: argparse.Namespace) -> Config:
    return load_config(getattr(args, "config", None), preset=getattr(args, "preset", None))


# generate


def read_generator_spec(path: Path) -> GeneratorSpec:
    with path.open(encoding="utf-8") as handle:
        document = json.load(handle)
    if not isinstance(document, dict):
        raise SchemaError("generator spec must be a JSON object", path)
    version = document.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format_version {version!r}", path, "format_version")
    return GeneratorSpec.from_dict(document)


def command_generate(args: argparse.Namespace) -> int:
    spec = read_generator_spec(Path(args.spec)) if args.spec else GeneratorSpec.profile(args.profile)
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.videos is not None:
        overrides["videos"] = args.videos
    if overrides:
        spec = spec.with_overrides(**overrides)
    manifest = generate_corpus(spec, Path(args.out), threads=args.threads)
    payload = {"out": str(args.out), "videos": len(manifest["videos"]), "seed": spec.seed}
    emit(payload, args.format, lambda: f"Wrote {payload['videos']} videos to {args.out}")
    return 0


# score


def command_score(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    sequence = read_probabilities(args.probs)
    scores = score_boundaries(sequence, config)
    payload: dict[str, Any] = {"T": sequence.T, "scores": scores.scores.tolist()}
    if args.transcript:
        candidates = select_candidates(scores, read_transcript(args.transcript), config)
        payload["candidates"] = list(candidates.timestamps)
        payload["suppression_radius"] = candidates.radius

    def text() -> str:
        lines = [f"{frame} {value:.17g}" for frame, value in enumerate(scores.scores, start=1)]
        if "candidates" in payload:
            lines.append("# candidates " + " ".join(str(item) for item in payload["candidates"]))
        return "\n".join(lines)

    emit(payload, args.format, text)
    return 0


# align


def align_video(
    sequence: ProbabilitySequence,
    transcript: Transcript,
    config: Config,
    baseline: str | None,
) -> PipelineResult:
    if baseline == "class-agnostic":
        return class_agnostic_baseline(sequence, transcript, config)
    if baseline == "viterbi-oracle":
        labels = exhaustive_segmentation_aligner(sequence, transcript)
        diagnostics = Diagnostics(
            video_id=transcript.video_id,
            frames=sequence.T,
            processed_frames=sequence.T,
            actions=transcript.M,
            score_fusion="viterbi-oracle",
        )
        return PipelineResult(labels, diagnostics)
    return atba_pipeline(sequence, transcript, config)


def segments_table(result: PipelineResult) -> str:
    rows = [segment._asdict() for segment in segmentation_from_labels(result.labels).segments]
    return tabulate(rows, headers="keys", tablefmt="github")


def align_single(args: argparse.Namespace, config: Config) -> int:
    sequence = read_probabilities(args.probs)
    transcript = read_transcript(args.transcript)
    result = align_video(sequence, transcript, config, args.baseline)
    video_id = transcript.video_id or Path(args.probs).stem
    if args.out:
        write_labels(args.out, video_id, result.labels, diagnostics=result.diagnostics.to_dict())
    payload = {"video_id": video_id, "labels": result.labels.labels.tolist(), "diagnostics": result.diagnostics.to_dict()}
    emit(payload, args.format, lambda: segments_table(result) + "\n\n" + json.dumps(result.diagnostics.to_dict(), indent=2))
    return 0


def align_corpus(args: argparse.Namespace, config: Config) -> int:
    corpus = Path(args.corpus)
    manifest = read_manifest(corpus / "manifest.json")
    out_dir = Path(args.out) if args.out else corpus / "pseudo_labels"

    def run(video: dict[str, Any]) -> dict[str, Any]:
        files = video["files"]
        try:
            sequence = read_probabilities(corpus / files["probs"])
            transcript = read_transcript(corpus / files["transcript"])
            result = align_video(sequence, transcript, config, args.baseline)
            write_labels(out_dir / "labels" / f"{video['id']}.json", video["id"], result.labels, diagnostics=result.diagnostics.to_dict())
            row: dict[str, Any] = {"id": video["id"], "K": result.diagnostics.K, "fallback": result.diagnostics.fallback}
            if "labels" in files:
                _, truth = read_labels(corpus / files["labels"])
                row["pl"] = pseudo_label_accuracy(result.labels, truth)
            return row
        except (AtbaError, OSError, KeyError) as exc:
            logger.error("%s: %s", video["id"], exc)
            detail = exc.to_dict() if isinstance(exc, AtbaError) else {"error": "io", "message": str(exc)}
            return {"id": video["id"], "failed": detail}

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(run, manifest["videos"]))

    failures = {row["id"]: row["failed"] for row in rows if "failed" in row}
    done = [row for row in rows if "failed" not in row]
    scored = [row for row in done if "pl" in row]
    report: dict[str, Any] = {
        "videos": len(rows),
        "aligned": len(done),
        "failed": failures,
        "fallbacks": sorted(row["id"] for row in done if row["fallback"]),
        "baseline": args.baseline or "atba",
    }
    if scored:
        frames = {video["id"]: video["T"] for video in manifest["videos"]}
        total = sum(frames[row["id"]] for row in scored)
        report["P.L."] = sum(row["pl"] * frames[row["id"]] for row in scored) / total
        report["P.L. (video-averaged)"] = sum(row["pl"] for row in scored) / len(scored)
    write_document(out_dir / "report.json", {"report": report, "videos": rows})
    logger.info("Aligned %d/%d videos into %s", len(done), len(rows), out_dir)

    def text() -> str:
        summary = tabulate([(key, value) for key, value in report.items() if key != "failed"], tablefmt="github")
        if failures:
            summary += "\n\nFailed videos:\n" + "\n".join(f"{key}: {value['message']}" for key, value in sorted(failures.items()))
        return summary

    emit(report, args.format, text)
    return 1 if failures else 0


def command_align(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.corpus:
        return align_corpus(args, config)
    if not (args.probs and args.transcript):
        raise ValidationError("align needs --corpus, or both --probs and --transcript")
    return align_single(args, config)


# evaluate


def command_evaluate(args: argparse.Namespace) -> int:
    truths = load_label_directory(args.truth)
    if args.pred:
        predictions = load_label_directory(args.pred)
    else:
        predictions = {name: predict_labels(sequence) for name, sequence in load_probability_directory(args.probs).items()}
    report = evaluate_corpus(predictions, truths, background=args.background)
    payload = {**report.summary(), "per_video": [vars(item) for item in report.per_video]}

    def text() -> str:
        summary = tabulate([report.summary()], headers="keys", tablefmt="github", floatfmt=".2f")
        if args.per_video:
            summary += "\n\n" + tabulate([vars(item) for item in report.per_video], headers="keys", tablefmt="github", floatfmt=".2f")
        return summary

    emit(payload, args.format, text)
    return 0


# bench


def command_bench(args: argparse.Namespace) -> int:
    options: dict[str, Any] = {"seed": args.seed if args.seed is not None else 0, "threads": args.threads}
    for name in ("videos", "instances", "repeats"):
        value = getattr(args, name)
        if value is not None:
            options[name] = value
    result = run_suite(args.suite, **options)
    if args.out:
        out = Path(args.out)
        if out.suffix == ".json":
            write_document(out, result.to_dict())
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(result.table() + "\n", encoding="utf-8")
    emit(result.to_dict(), args.format, result.table)
    return 0


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return threads
    value = os.getenv("ATBA_THREADS", "1")
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"ATBA_THREADS must be an integer, got {value!r}") from None


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="atba", description="Transition-aware boundary alignment toolkit")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (default: $ATBA_THREADS or 1)")
    parser.add_argument("--seed", type=int, default=None, help="Override the random seed")
    parser.add_argument("--format", choices=("json", "text"), default="text", help="Output format")
    parser.add_argument("--log-level", default=os.getenv("ATBA_LOG_LEVEL", "INFO"), help="Logging level")
    parser.add_argument("--log-file", default=os.getenv("ATBA_LOG_FILE"), help="Also log to this file")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Write a synthetic corpus")
    source = generate.add_mutually_exclusive_group()
    source.add_argument("--spec", help="Generator spec JSON file")
    source.add_argument("--profile", choices=("clean", "distractor"), default="clean", help="Built-in noise profile")
    generate.add_argument("--out", required=True, help="Output directory")
    generate.add_argument("--videos", type=int, default=None, help="Override the video count")
    generate.set_defaults(handler=command_generate)

    score = commands.add_parser("score", help="Print class-agnostic boundary scores")
    score.add_argument("--probs", required=True, help="Probability matrix file (.bin or .txt)")
    score.add_argument("--transcript", help="Also select candidates for this transcript")
    score.add_argument("--config", help="Config JSON file")
    score.add_argument("--preset", choices=sorted(PRESETS), help="Named hyperparameter preset")
    score.set_defaults(handler=command_score)

    align = commands.add_parser("align", help="Produce pseudo labels")
    align.add_argument("--probs", help="Probability matrix file for a single video")
    align.add_argument("--transcript", help="Transcript JSON file for a single video")
    align.add_argument("--corpus", help="Corpus directory containing manifest.json")
    align.add_argument("--out", help="Output labels file (single video) or directory (corpus)")
    align.add_argument("--config", help="Config JSON file")
    align.add_argument("--preset", choices=sorted(PRESETS), help="Named hyperparameter preset")
    align.add_argument("--baseline", choices=BASELINES, help="Use a reference method instead of ATBA")
    align.set_defaults(handler=command_align)

    evaluate = commands.add_parser("evaluate", help="Score predictions against ground truth")
    predictions = evaluate.add_mutually_exclusive_group(required=True)
    predictions.add_argument("--pred", help="Directory of predicted label documents")
    predictions.add_argument("--probs", help="Directory of probability files; predictions are per-frame argmax")
    evaluate.add_argument("--truth", required=True, help="Directory of ground-truth label documents")
    evaluate.add_argument("--background", type=int, default=None, help="Background class index for MoF-Bg")
    evaluate.add_argument("--per-video", action="store_true", help="Include a per-video table in text output")
    evaluate.set_defaults(handler=command_evaluate)

    bench = commands.add_parser("bench", help="Run a benchmark suite")
    bench.add_argument("--suite", required=True, choices=sorted(SUITES))
    bench.add_argument("--out", help="Write the result table (.json for JSON)")
    bench.add_argument("--videos", type=int, default=None, help="Corpus size for corpus suites")
    bench.add_argument("--instances", type=int, default=None, help="Random instances for oracle-equivalence")
    bench.add_argument("--repeats", type=int, default=None, help="Timing repeats")
    bench.set_defaults(handler=command_bench)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        configure_logging(args.log_level, args.log_file)
        args.threads = resolve_threads(args.threads)
        return args.handler(args)
    except AtbaError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(json.dumps({"error": "json", "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io", "message": exc.strerror or str(exc), "path": exc.filename}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
