"""Synthetic labeled video dataset trees.

Embeddings are class-conditional Gaussians: unit noise around class means
placed ``separation`` apart on coordinate axes, so a linear classifier
separates the classes by construction.  A fixed fraction of videos gets no
face in any frame.  Output is byte-identical across runs for a fixed seed.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emb1 import manifest_line, write_emb1, write_manifest

SPEC_KEYS = (
    "classes",
    "videos_per_class",
    "frames_per_video",
    "faces_per_frame",
    "dim",
    "separation",
    "seed",
    "faceless_fraction",
)


@dataclass(frozen=True)
class DatasetSpec:
    classes: int = 3
    videos_per_class: int = 40
    frames_per_video: int = 8
    faces_per_frame: tuple[int, int] = (1, 1)
    dim: int = 16
    separation: float = 6.0
    seed: int = 42
    faceless_fraction: float = 0.1

    def __post_init__(self):
        if min(self.classes, self.videos_per_class, self.frames_per_video, self.dim) < 1:
            raise ValueError("classes, videos, frames, and dim must all be positive")
        lo, hi = self.faces_per_frame
        if not 1 <= lo <= hi:
            raise ValueError(f"faces_per_frame must satisfy 1 <= lo <= hi, got {lo}..{hi}")
        if not 0 <= self.faceless_fraction < 1:
            raise ValueError("faceless_fraction must be in [0, 1)")
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        if self.classes > self.dim:
            raise ValueError("need classes <= dim to place orthogonal class means")

    @classmethod
    def from_json(cls, path) -> "DatasetSpec":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(obj) - set(SPEC_KEYS)
        if unknown:
            raise ValueError(f"unknown spec keys: {sorted(unknown)}")
        if "faces_per_frame" in obj:
            obj["faces_per_frame"] = tuple(obj["faces_per_frame"])
        return cls(**obj)


def generate(spec: DatasetSpec, out_dir) -> Path:
    """Write manifest.jsonl, labels.txt, and emb/*.emb; return the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "emb").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    means = np.zeros((spec.classes, spec.dim))
    for c in range(spec.classes):
        means[c, c] = spec.separation

    total = spec.classes * spec.videos_per_class
    n_faceless = int(round(spec.faceless_fraction * total))
    faceless = set(rng.choice(total, size=n_faceless, replace=False).tolist())

    lines = []
    labels = []
    lo, hi = spec.faces_per_frame
    for v in range(total):
        label = v // spec.videos_per_class
        video_id = f"vid{v:04d}"
        labels.append(label)
        if v in faceless:
            lines.append(manifest_line(video_id, label, [[] for _ in range(spec.frames_per_video)]))
            continue
        emb_file = f"emb/{video_id}.emb"
        rows = []
        frames = []
        for _ in range(spec.frames_per_video):
            frame = []
            for _ in range(int(rng.integers(lo, hi + 1))):
                x, y = rng.uniform(0, 200, size=2)
                w, h = rng.uniform(10, 60, size=2)
                frame.append(((float(x), float(y), float(w), float(h)), emb_file, len(rows)))
                rows.append(means[label] + rng.standard_normal(spec.dim))
            frames.append(frame)
        write_emb1(np.asarray(rows, dtype=np.float32), out_dir / emb_file)
        lines.append(manifest_line(video_id, label, frames))

    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(lines, manifest_path)
    (out_dir / "labels.txt").write_text("".join(f"{l}\n" for l in labels), encoding="utf-8")
    return manifest_path
