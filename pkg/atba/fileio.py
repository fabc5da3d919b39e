"""Interchange formats: binary matrices and JSON annotation documents.

Binary matrix layout (all little-endian)::

    8 bytes   magic, b"ATBAPSEQ" for probabilities or b"ATBAEMBD" for embeddings
    4 bytes   uint32 T (rows)
    4 bytes   uint32 C (columns)
    T*C*8     float64 values, row-major

Annotation documents are JSON objects that carry ``format_version``. Frames
and class indices inside them are 1-based; segment bounds are inclusive.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np

from atba.errors import FormatError, SchemaError, UnsupportedVersionError, ValidationError
from atba.model import ProbabilitySequence, PseudoLabels, Segment, Segmentation, Transcript

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PROBS_MAGIC = b"ATBAPSEQ"
EMBEDDING_MAGIC = b"ATBAEMBD"
HEADER = struct.Struct("<8sII")
TEXT_SUFFIXES = (".txt", ".text")
MAX_DIMENSION = 2**32 - 1


def encode_matrix(values: np.ndarray, magic: bytes = PROBS_MAGIC) -> bytes:
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise FormatError(f"only 2-D matrices can be encoded, got shape {matrix.shape}")
    rows, columns = matrix.shape
    if rows > MAX_DIMENSION or columns > MAX_DIMENSION:
        raise FormatError(f"dimensions {matrix.shape} overflow the 32-bit header")
    return HEADER.pack(magic, rows, columns) + matrix.astype("<f8").tobytes(order="C")


def decode_matrix(data: bytes, path: Path | str | None = None, magic: bytes = PROBS_MAGIC) -> np.ndarray:
    if len(data) < HEADER.size:
        raise FormatError(f"header needs {HEADER.size} bytes, file has {len(data)}", path, len(data))
    found, rows, columns = HEADER.unpack_from(data)
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}", path, 0)
    payload = rows * columns * 8
    expected = HEADER.size + payload
    if len(data) < expected:
        raise FormatError(
            f"truncated payload: T={rows}, C={columns} needs {expected} bytes, file has {len(data)}",
            path,
            len(data),
        )
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after a {rows}x{columns} payload", path, expected)
    values = np.frombuffer(data, dtype="<f8", count=rows * columns, offset=HEADER.size)
    return values.astype(np.float64).reshape(rows, columns)


def write_matrix(path: Path, values: np.ndarray, magic: bytes = PROBS_MAGIC) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_matrix(values, magic))


def read_matrix(path: Path, magic: bytes = PROBS_MAGIC) -> np.ndarray:
    return decode_matrix(Path(path).read_bytes(), path, magic)


def read_text_matrix(path: Path) -> np.ndarray:
    """One frame per line, whitespace-separated decimals."""
    try:
        values = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"malformed text matrix ({exc})", path) from exc
    if values.size == 0:
        raise FormatError("text matrix has no rows", path)
    return values


def read_probabilities(path: Path | str) -> ProbabilitySequence:
    path = Path(path)
    values = read_text_matrix(path) if path.suffix.lower() in TEXT_SUFFIXES else read_matrix(path)
    try:
        return ProbabilitySequence(values)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def write_probabilities(path: Path | str, sequence: ProbabilitySequence) -> None:
    write_matrix(Path(path), sequence.values, PROBS_MAGIC)


# JSON documents


def write_document(path: Path | str, payload: dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"format_version": FORMAT_VERSION, **payload}
    with path.open("w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, ensure_ascii=False)
        handle.write("\n")


def read_document(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc})", path) from exc
    if not isinstance(document, dict):
        raise SchemaError("document must be a JSON object", path)
    if "format_version" not in document:
        raise SchemaError("missing required field", path, "format_version")
    version = document["format_version"]
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported format_version {version!r}; this build reads version {FORMAT_VERSION}",
            path,
            "format_version",
        )
    return document


def _field(
    document: dict[str, Any],
    name: str,
    kind: type | tuple[type, ...],
    path: Path,
    where: str | None = None,
) -> Any:
    label = f"{where}.{name}" if where else name
    if name not in document:
        raise SchemaError("missing required field", path, label)
    value = document[name]
    if isinstance(value, bool) or not isinstance(value, kind):
        expected = kind.__name__ if isinstance(kind, type) else " or ".join(item.__name__ for item in kind)
        raise SchemaError(f"expected {expected}, got {type(value).__name__}", path, label)
    return value


def _int_list(document: dict[str, Any], name: str, path: Path) -> list[int]:
    values = _field(document, name, list, path)
    errors = [
        f"{name}[{index}]: expected int, got {type(item).__name__}"
        for index, item in enumerate(values)
        if isinstance(item, bool) or not isinstance(item, int)
    ]
    if errors:
        raise SchemaError("\n".join(errors), path, name)
    return values


def read_transcript(path: Path | str) -> Transcript:
    path = Path(path)
    document = read_document(path)
    video_id = None if document.get("video_id") is None else _field(document, "video_id", str, path)
    actions = _int_list(document, "actions", path)
    try:
        return Transcript(tuple(actions), video_id=video_id)
    except ValidationError as exc:
        raise SchemaError(str(exc), path, "actions") from exc


def write_transcript(path: Path | str, transcript: Transcript) -> None:
    """The video_id key is left out for transcripts without one."""
    document: dict[str, Any] = {"actions": list(transcript.actions)}
    if transcript.video_id is not None:
        document = {"video_id": transcript.video_id, **document}
    write_document(path, document)


def read_labels(path: Path | str) -> tuple[str, PseudoLabels]:
    path = Path(path)
    document = read_document(path)
    video_id = _field(document, "video_id", str, path)
    labels = _int_list(document, "labels", path)
    try:
        return video_id, PseudoLabels(np.asarray(labels, dtype=np.int64))
    except ValidationError as exc:
        raise SchemaError(str(exc), path, "labels") from exc


def write_labels(path: Path | str, video_id: str, labels: PseudoLabels, **extra: Any) -> None:
    write_document(path, {"video_id": video_id, "labels": labels.labels.tolist(), **extra})


def read_segmentation(path: Path | str) -> tuple[str, Segmentation]:
    path = Path(path)
    document = read_document(path)
    video_id = _field(document, "video_id", str, path)
    rows = _field(document, "segments", list, path)
    segments = []
    for index, row in enumerate(rows):
        where = f"segments[{index}]"
        if not isinstance(row, dict):
            raise SchemaError("expected an object with label, start, end", path, where)
        values = [_field(row, key, int, path, where) for key in ("label", "start", "end")]
        segments.append(Segment(*values))
    try:
        return video_id, Segmentation(tuple(segments))
    except ValidationError as exc:
        raise SchemaError(str(exc), path, "segments") from exc


def write_segmentation(path: Path | str, video_id: str, segmentation: Segmentation) -> None:
    segments = [segment._asdict() for segment in segmentation.segments]
    write_document(path, {"video_id": video_id, "segments": segments})


def read_vocabulary(path: Path | str) -> dict[int, str]:
    path = Path(path)
    document = read_document(path)
    rows = _field(document, "classes", list, path)
    vocabulary: dict[int, str] = {}
    for index, row in enumerate(rows):
        where = f"classes[{index}]"
        if not isinstance(row, dict):
            raise SchemaError("expected an object with index and name", path, where)
        class_index = _field(row, "index", int, path, where)
        if class_index < 1 or class_index in vocabulary:
            raise SchemaError(f"class index {class_index} is not a new index >= 1", path, f"{where}.index")
        vocabulary[class_index] = _field(row, "name", str, path, where)
    return vocabulary


def write_vocabulary(path: Path | str, vocabulary: dict[int, str]) -> None:
    rows = [{"index": index, "name": vocabulary[index]} for index in sorted(vocabulary)]
    write_document(path, {"classes": rows})


def read_manifest(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    document = read_document(path)
    _field(document, "spec", dict, path)
    videos = _field(document, "videos", list, path)
    for index, video in enumerate(videos):
        where = f"videos[{index}]"
        if not isinstance(video, dict):
            raise SchemaError("expected an object with id, T, files", path, where)
        for name, kind in (("id", str), ("T", int), ("files", dict)):
            if name not in video:
                raise SchemaError("missing required field", path, f"{where}.{name}")
            if isinstance(video[name], bool) or not isinstance(video[name], kind):
                raise SchemaError(f"expected {kind.__name__}", path, f"{where}.{name}")
    return document


def write_manifest(path: Path | str, spec: dict[str, Any], videos: list[dict[str, Any]]) -> None:
    write_document(path, {"spec": spec, "videos": videos})


def load_label_directory(directory: Path | str) -> dict[str, PseudoLabels]:
    """Read every ``*.json`` label document in a directory, keyed by video id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SchemaError("not a directory", directory)
    labels: dict[str, PseudoLabels] = {}
    for path in sorted(directory.glob("*.json")):
        video_id, values = read_labels(path)
        if video_id in labels:
            raise SchemaError(f"duplicate video id {video_id!r}", path, "video_id")
        labels[video_id] = values
    return labels


def load_probability_directory(directory: Path | str) -> dict[str, ProbabilitySequence]:
    """Read every probability file in a directory, keyed by file stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SchemaError("not a directory", directory)
    sequences = {}
    for path in sorted(directory.iterdir()):
        if path.is_file() and (path.suffix == ".bin" or path.suffix.lower() in TEXT_SUFFIXES):
            sequences[path.stem] = read_probabilities(path)
    return sequences
