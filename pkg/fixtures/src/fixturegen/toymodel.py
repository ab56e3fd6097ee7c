"""A tiny convolutional ONNX model standing in for a real backbone.

Architecture (input 1x3x224x224, all float32):

    Conv 3->8, 3x3, stride 2, pad 1   -> Relu
    Conv 8->16, 3x3, stride 2, pad 1  -> Relu
    GlobalAveragePool -> Flatten -> Gemm 16->D   ("embedding" output)

Weights come from a seeded generator, so a fixed seed yields a
byte-identical file.  A companion JSON next to the model records the
embedding of one fixed synthetic test image, computed by parsing the
written file and running it, so any consumer can verify its own ONNX
integration end to end.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .onnxpb import Graph, Model, Node, evaluate, load, save

INPUT_NAME = "image"
OUTPUT_NAME = "embedding"
INPUT_SHAPE = (1, 3, 224, 224)
REFERENCE_FORMULA = "image[0][c][y][x] = ((3*y + 5*x + 7*c) % 256) / 255"


def reference_image() -> np.ndarray:
    """The fixed test image, reproducible from REFERENCE_FORMULA alone."""
    c, y, x = np.meshgrid(np.arange(3), np.arange(224), np.arange(224), indexing="ij")
    img = ((3 * y + 5 * x + 7 * c) % 256) / 255.0
    return img[None].astype(np.float32)


def build_toy_model(dim: int, seed: int) -> Model:
    if dim < 8:
        raise ValueError(f"embedding dimension must be >= 8, got {dim}")
    rng = np.random.default_rng(seed)

    def conv_init(cout, cin, k):
        std = np.sqrt(2.0 / (cin * k * k))
        return (std * rng.standard_normal((cout, cin, k, k))).astype(np.float32)

    init = {
        "conv1.weight": conv_init(8, 3, 3),
        "conv1.bias": (0.01 * rng.standard_normal(8)).astype(np.float32),
        "conv2.weight": conv_init(16, 8, 3),
        "conv2.bias": (0.01 * rng.standard_normal(16)).astype(np.float32),
        "fc.weight": (0.25 * rng.standard_normal((dim, 16))).astype(np.float32),
        "fc.bias": (0.01 * rng.standard_normal(dim)).astype(np.float32),
    }
    conv_attrs = {
        "dilations": [1, 1],
        "group": 1,
        "kernel_shape": [3, 3],
        "pads": [1, 1, 1, 1],
        "strides": [2, 2],
    }
    nodes = [
        Node("Conv", [INPUT_NAME, "conv1.weight", "conv1.bias"], ["c1"], "conv1", dict(conv_attrs)),
        Node("Relu", ["c1"], ["r1"], "relu1"),
        Node("Conv", ["r1", "conv2.weight", "conv2.bias"], ["c2"], "conv2", dict(conv_attrs)),
        Node("Relu", ["c2"], ["r2"], "relu2"),
        Node("GlobalAveragePool", ["r2"], ["gap"], "gap"),
        Node("Flatten", ["gap"], ["flat"], "flatten", {"axis": 1}),
        Node("Gemm", ["flat", "fc.weight", "fc.bias"], [OUTPUT_NAME], "fc",
             {"alpha": 1.0, "beta": 1.0, "transB": 1}),
    ]
    graph = Graph(
        name="toy_backbone",
        nodes=nodes,
        initializers=init,
        inputs=[(INPUT_NAME, INPUT_SHAPE)],
        outputs=[(OUTPUT_NAME, (1, dim))],
    )
    return Model(graph=graph)


def fresh_forward_pass(onnx_path, image: np.ndarray | None = None) -> np.ndarray:
    """Parse the file and run it on the fixed test image; returns (D,)."""
    graph = load(onnx_path)
    feed = reference_image() if image is None else image
    return evaluate(graph, {INPUT_NAME: feed})[OUTPUT_NAME][0]


def export_toy_model(seed: int, dim: int, out_path) -> tuple[Path, Path]:
    """Write model.onnx plus <model>.ref.json; returns both paths.

    The recorded reference embedding is produced by loading the bytes just
    written and evaluating them, not by reusing the in-memory graph.
    """
    out_path = Path(out_path)
    save(build_toy_model(dim, seed), out_path)
    embedding = fresh_forward_pass(out_path)
    ref_path = out_path.with_name(out_path.name + ".ref.json")
    ref_path.write_text(
        json.dumps(
            {
                "model": out_path.name,
                "dim": dim,
                "seed": seed,
                "opset": 13,
                "input_name": INPUT_NAME,
                "input_shape": list(INPUT_SHAPE),
                "output_name": OUTPUT_NAME,
                "reference_input": REFERENCE_FORMULA,
                "embedding": [float(v) for v in embedding],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return out_path, ref_path
