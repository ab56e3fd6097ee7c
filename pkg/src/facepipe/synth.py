"""Synthetic labeled video datasets in the EMB1/manifest formats.

Embeddings are class-conditional Gaussians (unit noise around class means
placed ``separation`` apart along coordinate axes), so the downstream
pipeline is linearly separable by construction.  A designated fraction of
videos has zero faces in every frame, exercising the zero-descriptor path.

Output tree, deterministic for a fixed seed::

    out_dir/
      manifest.jsonl
      labels.txt          # one label per manifest line
      emb/<video>.emb     # one EMB1 file per face-bearing video
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParamError
from .io import FaceDetection, VideoSample, write_embedding_file, write_manifest

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
class SyntheticSpec:
    """Shape and difficulty of one generated dataset."""

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
            raise ParamError("classes, videos, frames, and dim must all be positive")
        lo, hi = self.faces_per_frame
        if not 1 <= lo <= hi:
            raise ParamError(f"faces_per_frame must satisfy 1 <= lo <= hi, got {lo}..{hi}")
        if not 0 <= self.faceless_fraction < 1:
            raise ParamError("faceless_fraction must be in [0, 1)")
        if self.separation <= 0:
            raise ParamError("separation must be positive")
        if self.classes > self.dim:
            raise ParamError("need classes <= dim to place orthogonal class means")

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(obj) - set(SPEC_KEYS)
        if unknown:
            raise ParamError(f"unknown spec keys: {sorted(unknown)}")
        if "faces_per_frame" in obj:
            obj["faces_per_frame"] = tuple(obj["faces_per_frame"])
        return cls(**obj)


def generate_dataset(spec: SyntheticSpec, out_dir) -> Path:
    """Write the dataset tree and return the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "emb").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    # class means on scaled coordinate axes: pairwise distance separation*sqrt(2)
    means = np.zeros((spec.classes, spec.dim))
    for c in range(spec.classes):
        means[c, c] = spec.separation

    total = spec.classes * spec.videos_per_class
    n_faceless = int(round(spec.faceless_fraction * total))
    faceless = set(rng.choice(total, size=n_faceless, replace=False).tolist())

    samples: list[VideoSample] = []
    lo, hi = spec.faces_per_frame
    for v in range(total):
        label = v // spec.videos_per_class
        vid = f"vid{v:04d}"
        if v in faceless:
            samples.append(
                VideoSample(id=vid, label=label, frames=[[] for _ in range(spec.frames_per_video)])
            )
            continue
        rows = []
        frames = []
        emb_file = f"emb/{vid}.emb"
        for _ in range(spec.frames_per_video):
            n_faces = int(rng.integers(lo, hi + 1))
            frame = []
            for _ in range(n_faces):
                x, y = rng.uniform(0, 200, size=2)
                w, h = rng.uniform(10, 60, size=2)
                frame.append(
                    FaceDetection(
                        box=(float(x), float(y), float(w), float(h)),
                        file=emb_file,
                        row=len(rows),
                    )
                )
                rows.append(means[label] + rng.standard_normal(spec.dim))
            frames.append(frame)
        write_embedding_file(
            np.asarray(rows, dtype=np.float32), out_dir / emb_file
        )
        samples.append(VideoSample(id=vid, label=label, frames=frames))

    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(samples, manifest_path)
    (out_dir / "labels.txt").write_text(
        "".join(f"{s.label}\n" for s in samples), encoding="utf-8"
    )
    return manifest_path
