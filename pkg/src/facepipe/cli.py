"""Command-line pipeline: pool, train-svm, eval, age, identify, bench.

Exit codes: 0 success, 2 usage error, 1 data/computation error.  Results
go to stdout as JSON; everything else goes to stderr.  All commands are
deterministic given their flags and seeds, and never modify input files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import classify, heads, metrics, pooling
from . import io as eio
from .errors import ParamError, PipelineError, ProtocolError

DEFAULT_SEED = 42


class UsageError(Exception):
    """Bad flag combination; maps to exit code 2 like argparse errors."""


def _info(msg: str) -> None:
    print(f"[facepipe] {msg}", file=sys.stderr)


def cmd_pool(args) -> int:
    samples = eio.load_manifest(args.manifest)
    mode = pooling.PoolingMode(args.mode)
    store = eio.EmbeddingStore(os.path.dirname(os.path.abspath(args.manifest)))
    descriptors, valid = pooling.pool_dataset(samples, mode, store, l2=not args.no_l2)
    eio.write_embedding_file(descriptors, args.out)
    _info(f"pool mode={args.mode} l2={not args.no_l2} manifest={args.manifest}")
    print(
        json.dumps(
            {
                "command": "pool",
                "mode": args.mode,
                "videos": len(samples),
                "valid": int(valid.sum()),
                "descriptor_dim": int(descriptors.shape[1]),
                "l2": not args.no_l2,
                "out": str(args.out),
            }
        )
    )
    return 0


def cmd_train_svm(args) -> int:
    X = eio.read_embedding_file(args.x)
    y = eio.read_labels(args.y)
    if y.shape[0] != X.shape[0]:
        raise ParamError(f"{y.shape[0]} labels for {X.shape[0]} descriptor rows")
    # zero descriptors (clips without any detected face) never enter training
    nonzero = np.any(X != 0, axis=1)
    dropped = int((~nonzero).sum())
    config = classify.TrainConfig(lam=args.lam, epochs=args.epochs, seed=args.seed)
    model = classify.train_linear_svm(X[nonzero], y[nonzero], config)
    classify.save_model(model, args.out)
    _info(f"train-svm seed={config.seed} lambda={config.lam} epochs={config.epochs}")
    print(
        json.dumps(
            {
                "command": "train-svm",
                "seed": config.seed,
                "lambda": config.lam,
                "epochs": config.epochs,
                "classes": model.classes,
                "dim": model.dim,
                "rows": int(nonzero.sum()),
                "zero_rows_dropped": dropped,
                "out": str(args.out),
            }
        )
    )
    return 0


def cmd_eval(args) -> int:
    model = classify.load_model(args.model)
    X = eio.read_embedding_file(args.x)
    y = eio.read_labels(args.y)
    if y.shape[0] != X.shape[0]:
        raise ParamError(f"{y.shape[0]} labels for {X.shape[0]} descriptor rows")
    scores = classify.svm_scores(model, X)

    if args.classes_7_of_8:
        if args.contempt_index is None:
            raise UsageError("--classes-7-of-8 requires --contempt-index")
        if model.classes != 8:
            raise ParamError(f"--classes-7-of-8 needs an 8-class model, got {model.classes}")
        pred = np.empty(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            reduced = heads.reduce_scores_8_to_7(heads.softmax(scores[i]), args.contempt_index)
            pred[i] = int(np.argmax(reduced))
        n_classes = 7
    else:
        pred = scores.argmax(axis=1)
        n_classes = model.classes

    if args.subset_valid_only:
        mask = np.any(X != 0, axis=1)  # zero rows are the substituted descriptors
        report = metrics.subset_report(pred, y, n_classes, mask)
    else:
        report = metrics.accuracy_and_confusion(pred, y, n_classes)
    _info(
        f"eval model={args.model} subset_valid_only={args.subset_valid_only} "
        f"classes_7_of_8={args.classes_7_of_8} accuracy={report.accuracy:.2f}%"
    )
    print(report.to_json())
    return 0


def cmd_age(args) -> int:
    probs = eio.read_embedding_file(args.probs)
    ages = eio.read_number_lines(args.ages)
    if probs.shape[1] != ages.shape[0]:
        raise ParamError(f"{probs.shape[1]} posterior columns for {ages.shape[0]} ages")
    top_l = args.top_l if args.top_l is not None else ages.shape[0]
    predicted = [heads.expected_age(row, ages, top_l) for row in probs]
    _info(f"age top_l={top_l} rows={probs.shape[0]}")
    print(json.dumps({"command": "age", "top_l": top_l, "n": len(predicted), "predicted": predicted}))
    return 0


def cmd_identify(args) -> int:
    X = eio.read_embedding_file(args.embeddings)
    subjects = eio.read_labels(args.subjects)
    if subjects.shape[0] != X.shape[0]:
        raise ParamError(f"{subjects.shape[0]} subject ids for {X.shape[0]} rows")
    if subjects.shape[0] == 0:
        raise ProtocolError("no embeddings")
    ids = np.unique(subjects)
    groups = [X[subjects == s] for s in ids]
    report = classify.rank1_identification(groups, repetitions=args.reps, seed=args.seed)
    mean, std = report.mean_std
    _info(
        f"identify seed={args.seed} reps={args.reps} subjects={len(ids)} "
        f"rank-1 {mean:.2f} +/- {std:.2f} (population std over repetitions)"
    )
    print(report.to_json())
    return 0


def bench_pooling(frames: int, dim: int, repeats: int, seed: int = DEFAULT_SEED) -> dict:
    """Wall-clock per-descriptor latency of statistical pooling on random data."""
    if min(frames, dim, repeats) < 1:
        raise ParamError("frames, dim, and repeats must all be positive")
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((frames, dim)).astype(np.float32)
    times_ms = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        pooling.stat_pool_video(data)
        times_ms.append(1e3 * (time.perf_counter() - t0))
    times = np.asarray(times_ms)
    mean, std = metrics.mean_std(times)
    return {
        "command": "bench",
        "frames": frames,
        "dim": dim,
        "repeats": repeats,
        "seed": seed,
        "cores": os.cpu_count(),
        "mean_ms": mean,
        "p95_ms": float(np.percentile(times, 95)),
        "std_ms": std,
        "min_ms": float(times.min()),
        "max_ms": float(times.max()),
    }


def cmd_bench(args) -> int:
    result = bench_pooling(args.frames, args.dim, args.reps, seed=args.seed)
    _info(
        f"bench seed={args.seed} cores={result['cores']} "
        "(std over repeats is the population std)"
    )
    print(json.dumps(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facepipe",
        description="Statistical pooling of face embeddings into video descriptors, "
        "linear classification, and evaluation protocols.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("pool", help="pool a manifest into video descriptors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=["single", "group"])
    p.add_argument("--out", required=True)
    p.add_argument("--no-l2", action="store_true", help="skip L2 normalization")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("train-svm", help="train a one-vs-rest linear SVM")
    p.add_argument("--x", required=True, help="EMB1 descriptor matrix")
    p.add_argument("--y", required=True, help="labels file, one integer per line")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("eval", help="evaluate a model on labeled descriptors")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--subset-valid-only", action="store_true")
    p.add_argument("--classes-7-of-8", action="store_true")
    p.add_argument("--contempt-index", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("age", help="expected-age readout from posteriors")
    p.add_argument("--probs", required=True, help="EMB1 matrix of posteriors")
    p.add_argument("--ages", required=True, help="age grid, one value per line")
    p.add_argument("--top-l", type=int, default=None, help="default: all ages")
    p.set_defaults(func=cmd_age)

    p = sub.add_parser("identify", help="rank-1 identification protocol")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--subjects", required=True, help="subject id per row")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("bench", help="pooling latency benchmark")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_bench)

    return parser


def run(argv=None) -> int:
    """Dispatch one invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (PipelineError, IndexError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
