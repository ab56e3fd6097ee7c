#!/usr/bin/env python3
"""Pooling latency sweep over the backbone dimensions of interest.

Reports per-descriptor wall-clock time (mean / p95 over repeats) for a few
clip lengths at D=1024 and D=1280.
"""

import argparse

from facepipe.cli import bench_pooling


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    print(f"seed={args.seed} reps={args.reps}")
    print(f"{'frames':>8} {'dim':>6} {'mean ms':>9} {'p95 ms':>9} {'std ms':>8}")
    for dim in (1024, 1280):
        for frames in (100, 1000, 10_000):
            r = bench_pooling(frames=frames, dim=dim, repeats=args.reps, seed=args.seed)
            print(
                f"{frames:>8} {dim:>6} {r['mean_ms']:>9.3f} "
                f"{r['p95_ms']:>9.3f} {r['std_ms']:>8.3f}"
            )
    r = bench_pooling(frames=10, dim=1280, repeats=args.reps, seed=args.seed)
    print(f"\ncores={r['cores']}")


if __name__ == "__main__":
    main()
