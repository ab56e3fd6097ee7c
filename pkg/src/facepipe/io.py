"""Embedding matrices, dataset manifests, and face-selection preprocessing.

Two on-disk formats live here, both fixed little-endian:

EMB1 embedding file
    bytes 0-3   ASCII magic ``EMB1``
    bytes 4-7   u32 dimension D (must be > 0)
    bytes 8-11  u32 row count T
    then        T*D float32 values, row-major

Manifest
    UTF-8 JSON lines, one video per line::

        {"id": str, "label": int, "frames": [[{"box": [x, y, w, h],
                                               "file": str, "row": int}, ...], ...]}

    An empty inner list is a frame with no detected faces.  ``file`` paths
    are interpreted relative to the manifest's directory.

Matrices are plain numpy float32 arrays of shape (T, D).  NaN/Inf values
are accepted here and rejected later by pooling, which is the code nearest
to the math that cannot tolerate them.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyInputError,
    FormatError,
    IoError,
    ParseError,
    RefError,
    ShapeError,
    TruncationError,
)

EMB1_MAGIC = b"EMB1"
EMB1_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class FaceDetection:
    """One detected face: pixel box plus a reference into an embedding file.

    ``box`` is (x, y, width, height) with width and height > 0; ``file`` is
    the manifest-relative path of the EMB1 file holding the face embedding
    and ``row`` the 0-based row inside it.
    """

    box: tuple[float, float, float, float]
    file: str
    row: int

    @property
    def area(self) -> float:
        return self.box[2] * self.box[3]


@dataclass
class VideoSample:
    """One labeled clip: ordered frames, each with zero or more detections."""

    id: str
    label: int
    frames: list[list[FaceDetection]] = field(default_factory=list)


def read_embedding_file(path) -> np.ndarray:
    """Read an EMB1 file into a float32 array of shape (T, D).

    Raises FormatError on bad magic or D == 0, TruncationError when the
    byte count disagrees with the header, IoError on OS failures.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if len(raw) < 4 or raw[:4] != EMB1_MAGIC:
        raise FormatError(f"{path}: not an EMB1 file (bad magic)")
    if len(raw) < EMB1_HEADER.size:
        raise TruncationError(f"{path}: truncated header ({len(raw)} bytes)")
    _, dim, rows = EMB1_HEADER.unpack_from(raw)
    if dim == 0:
        raise FormatError(f"{path}: dimension 0 is not a valid EMB1 matrix")
    expected = EMB1_HEADER.size + rows * dim * 4
    if len(raw) != expected:
        raise TruncationError(
            f"{path}: payload is {len(raw) - EMB1_HEADER.size} bytes, "
            f"header promises {rows}x{dim} ({expected - EMB1_HEADER.size})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=EMB1_HEADER.size)
    return data.reshape(rows, dim).astype(np.float32, copy=True)


def read_embedding_header(path) -> tuple[int, int]:
    """Return (D, T) from an EMB1 header without loading the payload."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read(EMB1_HEADER.size)
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if len(raw) < 4 or raw[:4] != EMB1_MAGIC:
        raise FormatError(f"{path}: not an EMB1 file (bad magic)")
    if len(raw) < EMB1_HEADER.size:
        raise TruncationError(f"{path}: truncated header ({len(raw)} bytes)")
    _, dim, rows = EMB1_HEADER.unpack_from(raw)
    if dim == 0:
        raise FormatError(f"{path}: dimension 0 is not a valid EMB1 matrix")
    return dim, rows


def write_embedding_file(matrix: np.ndarray, path) -> None:
    """Write a (T, D) array as an EMB1 file; byte-identical for equal inputs."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ShapeError(f"embedding matrix must be 2-D, got shape {m.shape}")
    rows, dim = m.shape
    if dim == 0:
        raise FormatError("cannot write an EMB1 matrix with dimension 0")
    payload = np.ascontiguousarray(m, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(EMB1_HEADER.pack(EMB1_MAGIC, dim, rows))
            fh.write(payload)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _parse_detection(obj, line_no: int) -> FaceDetection:
    if not isinstance(obj, dict):
        raise ParseError("detection must be an object", line_no)
    try:
        box = obj["box"]
        file_ = obj["file"]
        row = obj["row"]
    except (KeyError, TypeError):
        raise ParseError("detection needs box/file/row keys", line_no) from None
    if (
        not isinstance(box, list)
        or len(box) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box)
    ):
        raise ParseError("box must be [x, y, w, h] numbers", line_no)
    if box[2] <= 0 or box[3] <= 0:
        raise ParseError(f"box width/height must be positive, got {box[2]}x{box[3]}", line_no)
    if not isinstance(file_, str) or not file_:
        raise ParseError("detection file must be a non-empty string", line_no)
    if not isinstance(row, int) or isinstance(row, bool) or row < 0:
        raise ParseError("detection row must be a non-negative integer", line_no)
    return FaceDetection(box=tuple(float(v) for v in box), file=file_, row=row)


def load_manifest(path) -> list[VideoSample]:
    """Parse a JSONL manifest into VideoSamples, in file order.

    Every embedding reference is bounds-checked against the row count of the
    referenced EMB1 file (header read only).  Malformed lines raise
    ParseError with their 1-based line number; out-of-range or unreadable
    references raise RefError naming the offending sample.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e

    samples: list[VideoSample] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line_no) from None
        if not isinstance(obj, dict):
            raise ParseError("manifest line must be a JSON object", line_no)
        vid = obj.get("id")
        label = obj.get("label")
        frames = obj.get("frames")
        if not isinstance(vid, str):
            raise ParseError("id must be a string", line_no)
        if not isinstance(label, int) or isinstance(label, bool) or label < 0:
            raise ParseError("label must be a non-negative integer", line_no)
        if not isinstance(frames, list):
            raise ParseError("frames must be a list", line_no)
        parsed_frames = []
        for frame in frames:
            if not isinstance(frame, list):
                raise ParseError("each frame must be a list of detections", line_no)
            parsed_frames.append([_parse_detection(d, line_no) for d in frame])
        samples.append(VideoSample(id=vid, label=label, frames=parsed_frames))

    _validate_refs(samples, path.parent)
    return samples


def _validate_refs(samples: list[VideoSample], base_dir: Path) -> None:
    row_counts: dict[str, int] = {}
    for sample in samples:
        for frame in sample.frames:
            for det in frame:
                if det.file not in row_counts:
                    try:
                        _, rows = read_embedding_header(base_dir / det.file)
                    except (IoError, FormatError, TruncationError) as e:
                        raise RefError(
                            f"sample {sample.id!r}: embedding file {det.file!r} "
                            f"is unreadable ({e})"
                        ) from e
                    row_counts[det.file] = rows
                if det.row >= row_counts[det.file]:
                    raise RefError(
                        f"sample {sample.id!r}: row {det.row} out of range for "
                        f"{det.file!r} with {row_counts[det.file]} rows"
                    )


def write_manifest(samples: list[VideoSample], path) -> None:
    """Write samples as JSONL, inverse of load_manifest."""
    lines = []
    for s in samples:
        frames = [
            [{"box": list(d.box), "file": d.file, "row": d.row} for d in frame]
            for frame in s.frames
        ]
        lines.append(json.dumps({"id": s.id, "label": s.label, "frames": frames}))
    try:
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def select_primary_face(detections: list[FaceDetection]) -> int:
    """Index of the detection with the largest box area; ties go to the lowest index."""
    if not detections:
        raise EmptyInputError("no detections to select from")
    best = 0
    for i, det in enumerate(detections):
        if det.area > detections[best].area:
            best = i
    return best


class EmbeddingStore:
    """Cache of EMB1 matrices resolved relative to a base directory.

    All files in one store must share the embedding dimension; the first
    loaded file fixes it.
    """

    def __init__(self, base_dir):
        self.base_dir = Path(base_dir)
        self._cache: dict[str, np.ndarray] = {}
        self._dim: int | None = None

    @property
    def dim(self) -> int | None:
        return self._dim

    def matrix(self, file: str) -> np.ndarray:
        if file not in self._cache:
            try:
                m = read_embedding_file(self.base_dir / file)
            except (IoError, FormatError, TruncationError) as e:
                raise RefError(f"embedding file {file!r} is unreadable ({e})") from e
            if self._dim is None:
                self._dim = m.shape[1]
            elif m.shape[1] != self._dim:
                raise ShapeError(
                    f"{file!r} has dimension {m.shape[1]}, store expects {self._dim}"
                )
            self._cache[file] = m
        return self._cache[file]

    def vector(self, det: FaceDetection) -> np.ndarray:
        m = self.matrix(det.file)
        if det.row >= m.shape[0]:
            raise RefError(
                f"row {det.row} out of range for {det.file!r} with {m.shape[0]} rows"
            )
        return m[det.row]


def read_labels(path) -> np.ndarray:
    """Labels file: one integer per line, UTF-8."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    values = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            values.append(int(line.strip()))
        except ValueError:
            raise ParseError(f"not an integer: {line.strip()!r}", line_no) from None
    return np.asarray(values, dtype=np.int64)


def read_number_lines(path) -> np.ndarray:
    """One float per line, UTF-8 (used for age grids)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    values = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            values.append(float(line.strip()))
        except ValueError:
            raise ParseError(f"not a number: {line.strip()!r}", line_no) from None
    return np.asarray(values, dtype=np.float64)
