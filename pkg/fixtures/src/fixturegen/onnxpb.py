"""Minimal ONNX serialization and execution, self-contained.

The environment provides no onnx/onnxruntime wheels, so this module speaks
the protobuf wire format directly for the small subset of ONNX needed by
the toy model: float tensors, Conv / Relu / GlobalAveragePool / Flatten /
Gemm nodes, and scalar/list attributes.  Field numbers follow the official
onnx.proto schema; the reader also parses files produced by torch's
exporter, which the test suite uses as an independent oracle.

Serialization is pure byte concatenation in a fixed order, so equal models
produce identical files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# onnx.proto field numbers
_MODEL_IR_VERSION = 1
_MODEL_PRODUCER_NAME = 2
_MODEL_PRODUCER_VERSION = 3
_MODEL_GRAPH = 7
_MODEL_OPSET = 8
_OPSET_VERSION = 2
_GRAPH_NODE = 1
_GRAPH_NAME = 2
_GRAPH_INITIALIZER = 5
_GRAPH_INPUT = 11
_GRAPH_OUTPUT = 12
_NODE_INPUT = 1
_NODE_OUTPUT = 2
_NODE_NAME = 3
_NODE_OP_TYPE = 4
_NODE_ATTRIBUTE = 5
_ATTR_NAME = 1
_ATTR_F = 2
_ATTR_I = 3
_ATTR_INTS = 8
_ATTR_TYPE = 20
_ATTR_TYPE_FLOAT = 1
_ATTR_TYPE_INT = 2
_ATTR_TYPE_INTS = 7
_TENSOR_DIMS = 1
_TENSOR_DATA_TYPE = 2
_TENSOR_FLOAT_DATA = 4
_TENSOR_NAME = 8
_TENSOR_RAW_DATA = 9
_VALUEINFO_NAME = 1
_VALUEINFO_TYPE = 2
_TYPE_TENSOR = 1
_TENSORTYPE_ELEM = 1
_TENSORTYPE_SHAPE = 2
_SHAPE_DIM = 1
_DIM_VALUE = 1
_FLOAT32 = 1


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    name: str = ""
    attrs: dict = field(default_factory=dict)


@dataclass
class Graph:
    name: str
    nodes: list[Node]
    initializers: dict[str, np.ndarray]
    inputs: list[tuple[str, tuple[int, ...]]]
    outputs: list[tuple[str, tuple[int, ...]]]


@dataclass
class Model:
    graph: Graph
    ir_version: int = 7
    opset: int = 13
    producer_name: str = "fixturegen"
    producer_version: str = "0.1.0"


# ----- wire-format writing -----


def _varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("only non-negative varints are emitted")
    out = bytearray()
    while True:
        bits = value & 0x7F
        value >>= 7
        if value:
            out.append(bits | 0x80)
        else:
            out.append(bits)
            return bytes(out)


def _f_varint(fieldno: int, value: int) -> bytes:
    return _varint(fieldno << 3 | 0) + _varint(value)


def _f_bytes(fieldno: int, payload: bytes) -> bytes:
    return _varint(fieldno << 3 | 2) + _varint(len(payload)) + payload


def _f_string(fieldno: int, text: str) -> bytes:
    return _f_bytes(fieldno, text.encode("utf-8"))


def _f_fixed32(fieldno: int, value: float) -> bytes:
    return _varint(fieldno << 3 | 5) + struct.pack("<f", value)


def _attr_bytes(name: str, value) -> bytes:
    out = _f_string(_ATTR_NAME, name)
    if isinstance(value, bool):
        raise TypeError("boolean attributes are not part of the subset")
    if isinstance(value, int):
        out += _f_varint(_ATTR_I, value)
        out += _f_varint(_ATTR_TYPE, _ATTR_TYPE_INT)
    elif isinstance(value, float):
        out += _f_fixed32(_ATTR_F, value)
        out += _f_varint(_ATTR_TYPE, _ATTR_TYPE_FLOAT)
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        for v in value:
            out += _f_varint(_ATTR_INTS, v)
        out += _f_varint(_ATTR_TYPE, _ATTR_TYPE_INTS)
    else:
        raise TypeError(f"unsupported attribute {name}={value!r}")
    return out


def _node_bytes(node: Node) -> bytes:
    out = b""
    for i in node.inputs:
        out += _f_string(_NODE_INPUT, i)
    for o in node.outputs:
        out += _f_string(_NODE_OUTPUT, o)
    if node.name:
        out += _f_string(_NODE_NAME, node.name)
    out += _f_string(_NODE_OP_TYPE, node.op_type)
    for key in node.attrs:
        out += _f_bytes(_NODE_ATTRIBUTE, _attr_bytes(key, node.attrs[key]))
    return out


def _tensor_bytes(name: str, array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    out = b""
    for d in arr.shape:
        out += _f_varint(_TENSOR_DIMS, d)
    out += _f_varint(_TENSOR_DATA_TYPE, _FLOAT32)
    out += _f_string(_TENSOR_NAME, name)
    out += _f_bytes(_TENSOR_RAW_DATA, arr.tobytes())
    return out


def _valueinfo_bytes(name: str, shape: tuple[int, ...]) -> bytes:
    dims = b"".join(
        _f_bytes(_SHAPE_DIM, _f_varint(_DIM_VALUE, d)) for d in shape
    )
    tensor_type = _f_varint(_TENSORTYPE_ELEM, _FLOAT32) + _f_bytes(_TENSORTYPE_SHAPE, dims)
    return _f_string(_VALUEINFO_NAME, name) + _f_bytes(
        _VALUEINFO_TYPE, _f_bytes(_TYPE_TENSOR, tensor_type)
    )


def serialize(model: Model) -> bytes:
    g = model.graph
    graph = b""
    for node in g.nodes:
        graph += _f_bytes(_GRAPH_NODE, _node_bytes(node))
    graph += _f_string(_GRAPH_NAME, g.name)
    for name in g.initializers:
        graph += _f_bytes(_GRAPH_INITIALIZER, _tensor_bytes(name, g.initializers[name]))
    for name, shape in g.inputs:
        graph += _f_bytes(_GRAPH_INPUT, _valueinfo_bytes(name, shape))
    for name, shape in g.outputs:
        graph += _f_bytes(_GRAPH_OUTPUT, _valueinfo_bytes(name, shape))

    out = _f_varint(_MODEL_IR_VERSION, model.ir_version)
    out += _f_string(_MODEL_PRODUCER_NAME, model.producer_name)
    out += _f_string(_MODEL_PRODUCER_VERSION, model.producer_version)
    out += _f_bytes(_MODEL_GRAPH, graph)
    out += _f_bytes(_MODEL_OPSET, _f_varint(_OPSET_VERSION, model.opset))
    return out


def save(model: Model, path) -> None:
    Path(path).write_bytes(serialize(model))


# ----- wire-format reading -----


def _scan(buf: bytes):
    i = 0
    while i < len(buf):
        key, i = _read_varint(buf, i)
        fieldno, wtype = key >> 3, key & 7
        if wtype == 0:
            value, i = _read_varint(buf, i)
        elif wtype == 2:
            length, i = _read_varint(buf, i)
            value = buf[i : i + length]
            i += length
        elif wtype == 5:
            value = buf[i : i + 4]
            i += 4
        elif wtype == 1:
            value = buf[i : i + 8]
            i += 8
        else:
            raise ValueError(f"unsupported wire type {wtype}")
        yield fieldno, wtype, value


def _read_varint(buf: bytes, i: int) -> tuple[int, int]:
    value = shift = 0
    while True:
        b = buf[i]
        i += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, i
        shift += 7


def _varints_of(wtype, value) -> list[int]:
    if wtype == 0:
        return [value]
    out = []  # packed encoding
    i = 0
    while i < len(value):
        v, i = _read_varint(value, i)
        out.append(v)
    return out


def _parse_attr(buf: bytes):
    name = None
    kind = None
    f_val = None
    i_val = None
    ints: list[int] = []
    for fieldno, wtype, value in _scan(buf):
        if fieldno == _ATTR_NAME:
            name = value.decode("utf-8")
        elif fieldno == _ATTR_F:
            f_val = struct.unpack("<f", value)[0]
        elif fieldno == _ATTR_I:
            i_val = value
        elif fieldno == _ATTR_INTS:
            ints.extend(_varints_of(wtype, value))
        elif fieldno == _ATTR_TYPE:
            kind = value
    if kind == _ATTR_TYPE_FLOAT:
        return name, f_val
    if kind == _ATTR_TYPE_INT:
        return name, i_val
    if kind == _ATTR_TYPE_INTS:
        return name, ints
    raise ValueError(f"attribute {name!r} has unsupported type {kind}")


def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    name = ""
    dtype = None
    raw = None
    floats = None
    for fieldno, wtype, value in _scan(buf):
        if fieldno == _TENSOR_DIMS:
            dims.extend(_varints_of(wtype, value))
        elif fieldno == _TENSOR_DATA_TYPE:
            dtype = value
        elif fieldno == _TENSOR_NAME:
            name = value.decode("utf-8")
        elif fieldno == _TENSOR_RAW_DATA:
            raw = value
        elif fieldno == _TENSOR_FLOAT_DATA:
            floats = value
    if dtype != _FLOAT32:
        raise ValueError(f"tensor {name!r}: only float32 is supported, got type {dtype}")
    payload = raw if raw is not None else floats
    if payload is None:
        raise ValueError(f"tensor {name!r} carries no data")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    return name, arr


def _parse_node(buf: bytes) -> Node:
    node = Node(op_type="", inputs=[], outputs=[])
    for fieldno, _, value in _scan(buf):
        if fieldno == _NODE_INPUT:
            node.inputs.append(value.decode("utf-8"))
        elif fieldno == _NODE_OUTPUT:
            node.outputs.append(value.decode("utf-8"))
        elif fieldno == _NODE_NAME:
            node.name = value.decode("utf-8")
        elif fieldno == _NODE_OP_TYPE:
            node.op_type = value.decode("utf-8")
        elif fieldno == _NODE_ATTRIBUTE:
            key, attr = _parse_attr(value)
            node.attrs[key] = attr
    return node


def _parse_valueinfo_name(buf: bytes) -> str:
    for fieldno, _, value in _scan(buf):
        if fieldno == _VALUEINFO_NAME:
            return value.decode("utf-8")
    raise ValueError("value_info without a name")


def load(path) -> Graph:
    """Parse the graph of an ONNX file (the supported subset of it)."""
    graph_buf = None
    for fieldno, _, value in _scan(Path(path).read_bytes()):
        if fieldno == _MODEL_GRAPH:
            graph_buf = value
    if graph_buf is None:
        raise ValueError(f"{path}: no graph found; not an ONNX model?")

    graph = Graph(name="", nodes=[], initializers={}, inputs=[], outputs=[])
    for fieldno, _, value in _scan(graph_buf):
        if fieldno == _GRAPH_NODE:
            graph.nodes.append(_parse_node(value))
        elif fieldno == _GRAPH_NAME:
            graph.name = value.decode("utf-8")
        elif fieldno == _GRAPH_INITIALIZER:
            name, arr = _parse_tensor(value)
            graph.initializers[name] = arr
        elif fieldno == _GRAPH_INPUT:
            graph.inputs.append((_parse_valueinfo_name(value), ()))
        elif fieldno == _GRAPH_OUTPUT:
            graph.outputs.append((_parse_valueinfo_name(value), ()))
    return graph


# ----- numpy execution -----


def _conv(x, w, b, attrs):
    strides = attrs.get("strides", [1, 1])
    pads = attrs.get("pads", [0, 0, 0, 0])
    dilations = attrs.get("dilations", [1, 1])
    if list(dilations) != [1, 1] or attrs.get("group", 1) != 1:
        raise ValueError("only dilation 1 / group 1 convolutions are supported")
    n, cin, h, wd = x.shape
    f, _, kh, kw = w.shape
    if n != 1:
        raise ValueError("only batch size 1 is supported")
    ph0, pw0, ph1, pw1 = pads
    sh, sw = strides
    xp = np.pad(x, ((0, 0), (0, 0), (ph0, ph1), (pw0, pw1)))
    oh = (h + ph0 + ph1 - kh) // sh + 1
    ow = (wd + pw0 + pw1 - kw) // sw + 1
    cols = np.empty((cin * kh * kw, oh * ow), dtype=np.float32)
    row = 0
    for c in range(cin):
        for i in range(kh):
            for j in range(kw):
                patch = xp[0, c, i : i + oh * sh : sh, j : j + ow * sw : sw]
                cols[row] = patch.reshape(-1)
                row += 1
    out = w.reshape(f, -1) @ cols + b[:, None]
    return out.reshape(1, f, oh, ow).astype(np.float32)


def _gemm(a, b, c, attrs):
    alpha = attrs.get("alpha", 1.0)
    beta = attrs.get("beta", 1.0)
    if attrs.get("transA", 0):
        a = a.T
    if attrs.get("transB", 0):
        b = b.T
    return (alpha * (a @ b) + beta * c).astype(np.float32)


def evaluate(graph: Graph, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Run the graph on float32 inputs; returns the graph outputs by name."""
    values: dict[str, np.ndarray] = {
        k: v.astype(np.float32) for k, v in graph.initializers.items()
    }
    for k, v in feeds.items():
        values[k] = np.asarray(v, dtype=np.float32)
    for node in graph.nodes:
        ins = [values[i] for i in node.inputs]
        if node.op_type == "Conv":
            out = _conv(ins[0], ins[1], ins[2], node.attrs)
        elif node.op_type == "Relu":
            out = np.maximum(ins[0], np.float32(0.0))
        elif node.op_type == "GlobalAveragePool":
            out = ins[0].mean(axis=(2, 3), keepdims=True).astype(np.float32)
        elif node.op_type == "Flatten":
            axis = node.attrs.get("axis", 1)
            lead = int(np.prod(ins[0].shape[:axis])) if axis else 1
            out = ins[0].reshape(lead, -1)
        elif node.op_type == "Gemm":
            out = _gemm(ins[0], ins[1], ins[2], node.attrs)
        else:
            raise ValueError(f"unsupported op {node.op_type!r}")
        values[node.outputs[0]] = out
    return {name: values[name] for name, _ in graph.outputs}
