"""Fixture generators for the facial-analytics pipeline: synthetic labeled
datasets in the EMB1/JSONL manifest formats, and a small ONNX model whose
output stands in for backbone embeddings."""

__version__ = "0.1.0"
