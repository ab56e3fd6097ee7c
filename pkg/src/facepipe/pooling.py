"""Fixed-length video descriptors from variable-length embedding sequences.

Single-face clips pool the per-frame embeddings with four statistics
[mean; max; min; std], giving a 4*D descriptor.  Group clips pool twice
with [mean; std] only (faces within a frame, then frames within the clip),
which also lands at 4*D.  Standard deviation is the population one
(divide by T), so a single frame yields std 0 instead of a division by
zero.  Accumulation happens in float64; results are cast to float32.

Clips in which no frame has any face get an all-zero descriptor flagged
valid=False; zero descriptors are left unnormalized since normalizing the
zero vector is undefined.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, NumericError, ShapeError
from .io import EmbeddingStore, VideoSample, select_primary_face


class PoolingMode(enum.Enum):
    SINGLE_FACE = "single"
    GROUP = "group"


@dataclass
class VideoDescriptor:
    """Pooled clip descriptor; valid=False means the zero stand-in was used."""

    values: np.ndarray
    mode: PoolingMode
    valid: bool

    def __len__(self) -> int:
        return self.values.shape[0]


def _check_matrix(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ShapeError(f"{what} must be 2-D, got shape {m.shape}")
    if m.shape[0] == 0:
        raise EmptyInputError(f"{what} has no rows")
    if not np.isfinite(m).all():
        raise NumericError(f"{what} contains non-finite values")
    return m.astype(np.float64, copy=False)


def stat_pool_video(frames: np.ndarray) -> VideoDescriptor:
    """[mean; max; min; std] per dimension over frame embeddings, length 4*D."""
    x = _check_matrix(frames, "frame matrix")
    pooled = np.concatenate(
        [x.mean(axis=0), x.max(axis=0), x.min(axis=0), x.std(axis=0)]
    )
    return VideoDescriptor(
        values=pooled.astype(np.float32), mode=PoolingMode.SINGLE_FACE, valid=True
    )


def group_pool_frame(faces: np.ndarray) -> np.ndarray:
    """[mean; std] per dimension over the faces of one frame, length 2*D."""
    x = _check_matrix(faces, "face matrix")
    return np.concatenate([x.mean(axis=0), x.std(axis=0)]).astype(np.float32)


def group_pool_video(frame_descriptors: np.ndarray) -> VideoDescriptor:
    """[mean; std] over per-frame 2*D descriptors, final length 4*D."""
    x = _check_matrix(frame_descriptors, "frame descriptor matrix")
    pooled = np.concatenate([x.mean(axis=0), x.std(axis=0)])
    return VideoDescriptor(
        values=pooled.astype(np.float32), mode=PoolingMode.GROUP, valid=True
    )


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale to unit L2 norm; the zero vector maps to itself."""
    v = np.asarray(v)
    if not np.isfinite(v).all():
        raise NumericError("cannot normalize non-finite values")
    norm = np.linalg.norm(v.astype(np.float64))
    if norm == 0.0:
        return v.astype(np.float32, copy=True)
    return (v / norm).astype(np.float32)


def descriptor_for_video(
    sample: VideoSample,
    mode: PoolingMode,
    store: EmbeddingStore,
    *,
    face_select=select_primary_face,
    l2: bool = True,
    dim: int | None = None,
) -> VideoDescriptor:
    """Pool one clip into its descriptor.

    Frames without faces are skipped.  If no frame has a face the zero
    descriptor of the mode's length is returned with valid=False; ``dim``
    (or the store's already-known dimension) is needed to size it.
    In single-face mode ``face_select`` picks one detection per frame,
    largest box by default.
    """
    rows = []
    for frame in sample.frames:
        if not frame:
            continue
        if mode is PoolingMode.SINGLE_FACE:
            det = frame[face_select(frame)]
            rows.append(store.vector(det))
        else:
            faces = np.stack([store.vector(det) for det in frame])
            rows.append(group_pool_frame(faces))

    if not rows:
        d = store.dim if store.dim is not None else dim
        if d is None:
            raise ShapeError(
                f"sample {sample.id!r} has no faces and no dimension is known"
            )
        return VideoDescriptor(
            values=np.zeros(4 * d, dtype=np.float32), mode=mode, valid=False
        )

    stacked = np.stack(rows)
    if mode is PoolingMode.SINGLE_FACE:
        desc = stat_pool_video(stacked)
    else:
        desc = group_pool_video(stacked)
    if l2:
        desc.values = l2_normalize(desc.values)
    return desc


def pool_dataset(
    samples: list[VideoSample],
    mode: PoolingMode,
    store: EmbeddingStore,
    *,
    l2: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Descriptors for a whole manifest: (N, 4*D) matrix plus validity mask.

    The embedding dimension is inferred from the first resolvable reference;
    a dataset made only of face-less clips has no inferable dimension and is
    rejected.
    """
    dim = None
    for s in samples:
        for frame in s.frames:
            if frame:
                dim = store.matrix(frame[0].file).shape[1]
                break
        if dim is not None:
            break
    if dim is None:
        raise ShapeError("no sample references an embedding file; dimension unknown")

    descriptors = np.empty((len(samples), 4 * dim), dtype=np.float32)
    valid = np.empty(len(samples), dtype=bool)
    for i, s in enumerate(samples):
        d = descriptor_for_video(s, mode, store, l2=l2, dim=dim)
        if d.values.shape[0] != 4 * dim:
            raise ShapeError(
                f"sample {s.id!r} pooled to length {d.values.shape[0]}, "
                f"expected {4 * dim}"
            )
        descriptors[i] = d.values
        valid[i] = d.valid
    return descriptors, valid
