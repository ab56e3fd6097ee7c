"""One-vs-rest linear SVMs, nearest-neighbor classifiers, and the rank-1
identification protocol.

The SVM is trained per class with stochastic subgradient descent on the
hinge + L2 objective (Pegasos schedule eta_t = 1/(lambda*t), with the
optional projection onto the 1/sqrt(lambda) ball).  The bias is folded
into the weight vector as an augmented constant feature, so the
regularizer covers it too:

    f(w, b) = lambda/2 * (|w|^2 + b^2) + mean_i max(0, 1 - y_i (w.x_i + b))

Training is deterministic given the seed; each binary problem shuffles
with its own generator seeded by (seed, class index).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateLabelsError,
    FormatError,
    IoError,
    NumericError,
    ParamError,
    ProtocolError,
    ShapeError,
    TruncationError,
)
from .metrics import EvalReport, mean_std
from .pooling import l2_normalize

LSVM_MAGIC = b"LSVM"
LSVM_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run; all positive, seed fixed per run."""

    lam: float = 1e-4
    epochs: int = 50
    seed: int = 42

    def __post_init__(self):
        if not self.lam > 0:
            raise ParamError(f"lambda must be > 0, got {self.lam}")
        if not self.epochs > 0:
            raise ParamError(f"epochs must be > 0, got {self.epochs}")
        if not 0 <= self.seed < 2**64:
            raise ParamError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass
class LinearModel:
    """Per-class weight rows + biases for one-vs-rest scoring.

    ``objective_history`` holds the per-epoch regularized objective of each
    binary problem, shape (C, epochs); it is not serialized.  ``config`` is
    None for models loaded from disk, which store only weights and biases.
    """

    weights: np.ndarray
    biases: np.ndarray
    config: TrainConfig | None = None
    objective_history: np.ndarray | None = None

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _objective(v: np.ndarray, xa: np.ndarray, yc: np.ndarray, lam: float) -> float:
    margins = yc * (xa @ v)
    hinge = np.maximum(0.0, 1.0 - margins)
    return float(0.5 * lam * (v @ v) + hinge.mean())


def hinge_subgradient(
    w: np.ndarray, b: float, x: np.ndarray, y: int, lam: float
) -> tuple[np.ndarray, float]:
    """Subgradient of lam/2*(|w|^2 + b^2) + max(0, 1 - y(w.x + b)) at one sample.

    At the kink (margin exactly 1) the margin<1 branch is chosen.
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape:
        raise ShapeError(f"w {w.shape} and x {x.shape} differ")
    margin = y * (w @ x + b)
    gw = lam * w
    gb = lam * b
    if margin < 1.0:
        gw = gw - y * x
        gb = gb - y
    return gw, gb


def train_linear_svm(X: np.ndarray, y, config: TrainConfig) -> LinearModel:
    """Train C one-vs-rest hinge classifiers over labels {0..max(y)}.

    Deterministic for fixed data and seed.  Labels must contain at least
    two distinct values; X rows must be finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ShapeError(f"labels {y.shape} do not match {X.shape[0]} rows")
    if X.shape[0] < 2:
        raise ParamError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise NumericError("X contains non-finite values")
    if (y < 0).any():
        raise ParamError("labels must be non-negative class indices")
    if np.unique(y).size < 2:
        raise DegenerateLabelsError("training labels are all identical")

    n, d = X.shape
    n_classes = int(y.max()) + 1
    xa = np.concatenate([X, np.ones((n, 1))], axis=1)  # constant bias feature
    radius = 1.0 / np.sqrt(config.lam)

    weights = np.empty((n_classes, d), dtype=np.float64)
    biases = np.empty(n_classes, dtype=np.float64)
    history = np.empty((n_classes, config.epochs), dtype=np.float64)

    for c in range(n_classes):
        yc = np.where(y == c, 1.0, -1.0)
        rng = np.random.default_rng([config.seed, c])
        v = np.zeros(d + 1)
        t = 0
        for epoch in range(config.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (config.lam * t)
                margin = yc[i] * (xa[i] @ v)
                v *= 1.0 - eta * config.lam
                if margin < 1.0:
                    v += eta * yc[i] * xa[i]
                norm = np.linalg.norm(v)
                if norm > radius:
                    v *= radius / norm
            history[c, epoch] = _objective(v, xa, yc, config.lam)
        weights[c] = v[:d]
        biases[c] = v[d]

    return LinearModel(
        weights=weights, biases=biases, config=config, objective_history=history
    )


def svm_scores(model: LinearModel, X: np.ndarray) -> np.ndarray:
    """Decision scores w_c.x + b_c for a batch, shape (N, C)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ShapeError(f"X {X.shape} does not match model dimension {model.dim}")
    return X @ model.weights.T + model.biases


def svm_predict(model: LinearModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """(argmax label, score vector) for one descriptor; ties to lowest class."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise ShapeError(f"x {x.shape} does not match model dimension {model.dim}")
    scores = model.weights @ x + model.biases
    return int(np.argmax(scores)), scores


def save_model(model: LinearModel, path) -> None:
    """LSVM container: magic, u32 C, u32 D, C*D float32 weights, C float32 biases."""
    try:
        with open(path, "wb") as fh:
            fh.write(LSVM_HEADER.pack(LSVM_MAGIC, model.classes, model.dim))
            fh.write(np.ascontiguousarray(model.weights, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(model.biases, dtype="<f4").tobytes())
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def load_model(path) -> LinearModel:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    if len(raw) < 4 or raw[:4] != LSVM_MAGIC:
        raise FormatError(f"{path}: not an LSVM file (bad magic)")
    if len(raw) < LSVM_HEADER.size:
        raise TruncationError(f"{path}: truncated header")
    _, n_classes, dim = LSVM_HEADER.unpack_from(raw)
    if n_classes == 0 or dim == 0:
        raise FormatError(f"{path}: zero classes or dimension")
    expected = LSVM_HEADER.size + (n_classes * dim + n_classes) * 4
    if len(raw) != expected:
        raise TruncationError(f"{path}: {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f4", offset=LSVM_HEADER.size)
    weights = flat[: n_classes * dim].reshape(n_classes, dim).astype(np.float64)
    biases = flat[n_classes * dim :].astype(np.float64)
    return LinearModel(weights=weights, biases=biases)


def knn_predict(trainX: np.ndarray, trainY, query: np.ndarray, k: int) -> int:
    """Majority label among the k nearest training rows (Euclidean).

    Distance ties resolve to the lower training index, vote ties to the
    lowest label.
    """
    trainX = np.asarray(trainX, dtype=np.float64)
    trainY = np.asarray(trainY)
    query = np.asarray(query, dtype=np.float64)
    if trainX.ndim != 2 or query.ndim != 1 or trainX.shape[1] != query.shape[0]:
        raise ShapeError(f"query {query.shape} does not match train {trainX.shape}")
    if trainY.shape[0] != trainX.shape[0]:
        raise ShapeError("labels do not match training rows")
    if trainY.dtype.kind not in "iu" or (trainY < 0).any():
        raise ParamError("labels must be non-negative integers")
    if not 1 <= k <= trainX.shape[0]:
        raise ParamError(f"k must be in 1..{trainX.shape[0]}, got {k}")
    dists = ((trainX - query) ** 2).sum(axis=1)
    nearest = np.argsort(dists, kind="stable")[:k]
    votes = np.bincount(trainY[nearest])
    return int(np.argmax(votes))


def rank1_identification(
    subject_embeddings: list[np.ndarray], repetitions: int, seed: int
) -> EvalReport:
    """Repeated single-gallery-image identification.

    Per repetition r (generator seeded with seed + r): one embedding per
    subject is drawn as the gallery, every remaining embedding is a probe
    classified to its nearest gallery vector (Euclidean over L2-normed
    embeddings).  The report carries the pooled confusion matrix and the
    mean +/- population std of per-repetition rank-1 accuracy.
    """
    if repetitions < 1:
        raise ParamError(f"repetitions must be >= 1, got {repetitions}")
    if len(subject_embeddings) < 2:
        raise ProtocolError("need at least 2 subjects")
    normed = []
    for s, emb in enumerate(subject_embeddings):
        emb = np.asarray(emb, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] < 2:
            raise ProtocolError(f"subject {s} needs at least 2 embeddings")
        normed.append(np.stack([l2_normalize(row).astype(np.float64) for row in emb]))

    n_subjects = len(normed)
    confusion = np.zeros((n_subjects, n_subjects), dtype=np.int64)
    rep_accuracies = []
    for r in range(repetitions):
        rng = np.random.default_rng(seed + r)
        gallery_rows = [rng.integers(emb.shape[0]) for emb in normed]
        gallery = np.stack([emb[i] for emb, i in zip(normed, gallery_rows)])
        correct = 0
        total = 0
        for s, emb in enumerate(normed):
            probes = np.delete(emb, gallery_rows[s], axis=0)
            d = ((gallery[None, :, :] - probes[:, None, :]) ** 2).sum(axis=2)
            pred = d.argmin(axis=1)
            for p in pred:
                confusion[s, p] += 1
            correct += int((pred == s).sum())
            total += probes.shape[0]
        rep_accuracies.append(100.0 * correct / total)

    mean, std = mean_std(rep_accuracies)
    accuracy = 100.0 * np.trace(confusion) / confusion.sum()
    recalls = [
        100.0 * confusion[i, i] / row if (row := confusion[i].sum()) else 0.0
        for i in range(n_subjects)
    ]
    return EvalReport(
        accuracy=accuracy,
        recalls=np.asarray(recalls),
        confusion=confusion,
        mean_std=(mean, std),
    )
