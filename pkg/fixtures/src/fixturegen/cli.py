"""Console entry points: gen-dataset and gen-model."""

import argparse
import json
import sys

from .dataset import DatasetSpec, generate
from .toymodel import export_toy_model


def main_dataset(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="gen-dataset",
        description="Generate a synthetic EMB1/manifest dataset tree.",
    )
    parser.add_argument("--spec", required=True, help="JSON file with the dataset spec")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        spec = DatasetSpec.from_json(args.spec)
        manifest = generate(spec, args.out)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    print(json.dumps({"manifest": str(manifest), "videos": spec.classes * spec.videos_per_class}))


def main_model(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="gen-model",
        description="Export the toy convolutional backbone as ONNX with a "
        "recorded reference embedding.",
    )
    parser.add_argument("--dim", type=int, required=True)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out", required=True, help="output .onnx path")
    args = parser.parse_args(argv)
    try:
        onnx_path, ref_path = export_toy_model(args.seed, args.dim, args.out)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    print(json.dumps({"model": str(onnx_path), "reference": str(ref_path)}))
