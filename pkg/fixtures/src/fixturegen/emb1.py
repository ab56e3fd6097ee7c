"""Writers for the pipeline's on-disk interchange formats.

EMB1: ASCII magic "EMB1", u32 little-endian dimension D, u32 little-endian
row count T, then T*D little-endian float32 values row-major.

Manifest: UTF-8 JSON lines, one video per line:
{"id": str, "label": int, "frames": [[{"box": [x, y, w, h], "file": str,
"row": int}, ...], ...]}, with paths relative to the manifest's directory.

Implemented here from the format description so generated trees exercise
the consumer's parsers rather than sharing code with them.
"""

import json
import struct
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sII")


def write_emb1(matrix: np.ndarray, path) -> None:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[1] == 0:
        raise ValueError(f"need a 2-D matrix with at least one column, got {m.shape}")
    rows, dim = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"EMB1", dim, rows))
        fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def manifest_line(video_id: str, label: int, frames) -> str:
    """frames: list of frames, each a list of (box4, file, row) tuples."""
    return json.dumps(
        {
            "id": video_id,
            "label": label,
            "frames": [
                [{"box": list(box), "file": file, "row": row} for box, file, row in frame]
                for frame in frames
            ],
        }
    )


def write_manifest(lines, path) -> None:
    Path(path).write_text("".join(f"{l}\n" for l in lines), encoding="utf-8")
