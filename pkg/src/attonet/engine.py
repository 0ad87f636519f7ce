"""Reference CPU executor: direct grouped convolution, pooling, dense,
softmax, residual modules, deterministic weight initialization, and the
binary tensor/weight file formats.

This engine is a correctness reference, not a fast path: it processes one
example per call and accumulates in 32-bit floats by default (pass
``accum_dtype=np.float64`` for a 64-bit accumulation variant).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from .errors import MissingWeightsError, ShapeMismatchError, TensorFormatError
from .graph import (
    BoundLayer,
    BoundNetwork,
    LayerKind,
    TensorShape,
    conv_out_hw,
    module_id,
)
from .complexity import layer_weight_count

__all__ = [
    "Tensor",
    "WeightStore",
    "conv2d",
    "max_pool2d",
    "avg_pool2d",
    "dense",
    "softmax",
    "forward",
    "forward_trace",
    "init_weights",
    "save_tensor",
    "load_tensor",
    "save_weights",
    "load_weights",
]


@dataclass(frozen=True)
class Tensor:
    """A single example: float32 feature map in channels-first layout."""

    data: np.ndarray  # (channels, height, width)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"tensor must be rank 3, got rank {arr.ndim}")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> TensorShape:
        c, h, w = self.data.shape
        return TensorShape(c, h, w)

    @staticmethod
    def zeros(shape: TensorShape) -> "Tensor":
        return Tensor(np.zeros((shape.channels, shape.height, shape.width), np.float32))

    @staticmethod
    def random(shape: TensorShape, seed: int) -> "Tensor":
        rng = np.random.default_rng(seed)
        return Tensor(rng.standard_normal(
            (shape.channels, shape.height, shape.width)).astype(np.float32))


class WeightStore:
    """Flat per-layer value arrays, keyed by layer id.

    Each parameterized layer owns one float32 vector holding its weights
    followed by its bias (when present).  Convolution weights are laid out
    group by group as (out_g, in_g, kh, kw) blocks; dense weights as
    (out, in).
    """

    def __init__(self, entries: dict[str, np.ndarray] | None = None):
        self.entries: dict[str, np.ndarray] = {}
        for name, values in (entries or {}).items():
            self[name] = values

    def __setitem__(self, name: str, values: np.ndarray) -> None:
        self.entries[name] = np.ascontiguousarray(values, dtype=np.float32).reshape(-1)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self) -> Iterable[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        return (self.entries.keys() == other.entries.keys()
                and all(np.array_equal(self.entries[k], other.entries[k])
                        for k in self.entries))


def _stored_value_count(layer: BoundLayer) -> int:
    # weights plus bias; optional normalization stages run as identity at
    # inference and keep no stored parameters here
    count = layer_weight_count(layer)
    if count and layer.spec.has_bias:
        count += layer.out_channels
    return count


def _require(store: WeightStore, layer: BoundLayer) -> np.ndarray:
    if layer.layer_id not in store:
        raise MissingWeightsError(f"no weights for layer {layer.layer_id}")
    values = store[layer.layer_id]
    expected = _stored_value_count(layer)
    if values.size != expected:
        raise ShapeMismatchError(
            f"{layer.layer_id}: expected {expected} values, got {values.size}")
    return values


# ---------------------------------------------------------------------------
# primitive operations


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(c, h, w) -> (c*kh*kw, oh*ow) patch matrix over an already-padded map."""
    c = x.shape[0]
    sc, sh, sw = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(c, kh, kw, oh, ow),
        strides=(sc, sh, sw, stride * sh, stride * sw),
        writeable=False,
    )
    return windows.reshape(c * kh * kw, oh * ow)


def conv2d(x: Tensor, weights: np.ndarray, layer: BoundLayer,
           accum_dtype=np.float32) -> Tensor:
    """Direct cross-correlation (no kernel flip) with zero padding.

    Supports strides, uneven channel groups, and an optional bias stored at
    the tail of `weights`.
    """
    spec = layer.spec
    if spec.kind is not LayerKind.CONV:
        raise ShapeMismatchError(f"{layer.layer_id} is not a convolution")
    c, h, w = x.data.shape
    if c != layer.in_channels:
        raise ShapeMismatchError(
            f"{layer.layer_id}: input has {c} channels, layer binds {layer.in_channels}")
    weights = np.asarray(weights, dtype=accum_dtype).reshape(-1)
    n_weights = layer_weight_count(layer)
    expected = _stored_value_count(layer)
    if weights.size != expected:
        raise ShapeMismatchError(
            f"{layer.layer_id}: expected {expected} weight values, got {weights.size}")

    kh, kw = spec.kernel
    pad, stride = spec.padding, spec.stride
    oh = conv_out_hw(h, kh, stride, pad)
    ow = conv_out_hw(w, kw, stride, pad)
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(f"{layer.layer_id}: output would be {oh}x{ow}")

    data = x.data.astype(accum_dtype, copy=False)
    if pad:
        data = np.pad(data, ((0, 0), (pad, pad), (pad, pad)))

    out = np.empty((layer.out_channels, oh * ow), dtype=accum_dtype)
    w_off = 0
    c_in_off = 0
    c_out_off = 0
    for g_in, g_out in layer.weight_splits():
        block = weights[w_off:w_off + kh * kw * g_in * g_out]
        w_mat = block.reshape(g_out, g_in * kh * kw)
        cols = _im2col(data[c_in_off:c_in_off + g_in], kh, kw, stride, oh, ow)
        out[c_out_off:c_out_off + g_out] = w_mat @ cols
        w_off += block.size
        c_in_off += g_in
        c_out_off += g_out

    if spec.has_bias:
        out += weights[n_weights:n_weights + layer.out_channels].reshape(-1, 1)
    return Tensor(out.reshape(layer.out_channels, oh, ow).astype(np.float32))


def _pool(x: Tensor, layer: BoundLayer, reduce_max: bool) -> Tensor:
    spec = layer.spec
    kh, kw = spec.kernel
    pad, stride = spec.padding, spec.stride
    c, h, w = x.data.shape
    oh = conv_out_hw(h, kh, stride, pad)
    ow = conv_out_hw(w, kw, stride, pad)
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(f"{layer.layer_id}: output would be {oh}x{ow}")
    if pad:
        fill = -np.inf if reduce_max else 0.0
        data = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)),
                      constant_values=fill)
    else:
        data = x.data
    sc, sh, sw = data.strides
    windows = np.lib.stride_tricks.as_strided(
        data,
        shape=(c, oh, ow, kh, kw),
        strides=(sc, stride * sh, stride * sw, sh, sw),
        writeable=False,
    )
    if reduce_max:
        out = windows.max(axis=(3, 4))
    else:
        # zero padding participates in the average (fixed kernel-area denominator)
        out = windows.mean(axis=(3, 4))
    return Tensor(out.astype(np.float32))


def max_pool2d(x: Tensor, layer: BoundLayer) -> Tensor:
    return _pool(x, layer, reduce_max=True)


def avg_pool2d(x: Tensor, layer: BoundLayer) -> Tensor:
    return _pool(x, layer, reduce_max=False)


def dense(x: Tensor, weights: np.ndarray, layer: BoundLayer,
          accum_dtype=np.float32) -> Tensor:
    c, h, w = x.data.shape
    if (h, w) != (1, 1):
        raise ShapeMismatchError(
            f"{layer.layer_id}: dense requires 1x1 spatial input, got {h}x{w}")
    if c != layer.in_channels:
        raise ShapeMismatchError(
            f"{layer.layer_id}: input has {c} channels, layer binds {layer.in_channels}")
    weights = np.asarray(weights, dtype=accum_dtype).reshape(-1)
    n = layer.in_channels * layer.out_channels
    w_mat = weights[:n].reshape(layer.out_channels, layer.in_channels)
    out = w_mat @ x.data.reshape(c).astype(accum_dtype, copy=False)
    if layer.spec.has_bias:
        out = out + weights[n:n + layer.out_channels]
    return Tensor(out.reshape(layer.out_channels, 1, 1).astype(np.float32))


def softmax(x: Tensor) -> Tensor:
    v = x.data.reshape(-1).astype(np.float64)
    v = np.exp(v - v.max())
    v /= v.sum()
    return Tensor(v.reshape(x.data.shape).astype(np.float32))


def _relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0.0))


def _activate(x: Tensor, layer: BoundLayer) -> Tensor:
    return _relu(x) if layer.spec.activation == "relu" else x


# ---------------------------------------------------------------------------
# network execution


def forward_trace(bound: BoundNetwork, store: WeightStore, x: Tensor,
                  accum_dtype=np.float32) -> tuple[Tensor, list[tuple[str, TensorShape]]]:
    """Run the network and also return every layer's output shape.

    The trace lists one entry per layer in topological order (the shortcut
    entry reports the shortcut branch's own output).
    """
    if x.shape != bound.net.input_shape:
        raise ShapeMismatchError(
            f"input shape {x.shape} does not match network input {bound.net.input_shape}")
    trace: list[tuple[str, TensorShape]] = []

    def run_conv(layer_id: str, t: Tensor) -> Tensor:
        layer = bound[layer_id]
        out = conv2d(t, _require(store, layer), layer, accum_dtype)
        trace.append((layer_id, out.shape))
        return _activate(out, layer)

    def run_pool(layer_id: str, t: Tensor) -> Tensor:
        layer = bound[layer_id]
        out = (max_pool2d(t, layer) if layer.spec.kind is LayerKind.MAX_POOL
               else avg_pool2d(t, layer))
        trace.append((layer_id, out.shape))
        return out

    t = run_conv("stem.conv", x)
    t = run_pool("stem.pool", t)

    for i in range(1, len(bound.net.modules) + 1):
        mid = module_id(i)
        module_in = t
        t = run_conv(f"{mid}.compress", t)
        t = run_conv(f"{mid}.group_conv", t)
        t = run_conv(f"{mid}.mix", t)
        t = run_conv(f"{mid}.decompress", t)

        shortcut = bound[f"{mid}.shortcut"]
        if shortcut.spec.kind is LayerKind.IDENTITY:
            sc = module_in
            trace.append((shortcut.layer_id, sc.shape))
        else:
            sc = conv2d(module_in, _require(store, shortcut), shortcut, accum_dtype)
            trace.append((shortcut.layer_id, sc.shape))
        if sc.data.shape != t.data.shape:
            raise ShapeMismatchError(
                f"{mid}: residual add of {t.data.shape} with {sc.data.shape}")
        t = _relu(Tensor(t.data + sc.data))

    t = run_pool("head.pool", t)
    t = dense(t, _require(store, bound["head.dense"]), bound["head.dense"], accum_dtype)
    trace.append(("head.dense", t.shape))
    t = softmax(t)
    trace.append(("head.softmax", t.shape))

    if not np.isfinite(t.data).all():
        raise ArithmeticError("forward pass produced non-finite values")
    return t, trace


def forward(bound: BoundNetwork, store: WeightStore, x: Tensor,
            accum_dtype=np.float32) -> Tensor:
    """Class distribution for one input example (entries sum to one)."""
    out, _ = forward_trace(bound, store, x, accum_dtype)
    return out


def parameterized_layers(bound: BoundNetwork) -> list[BoundLayer]:
    return [layer for layer in bound.layers
            if layer.spec.kind in (LayerKind.CONV, LayerKind.DENSE)]


def init_weights(bound: BoundNetwork, seed: int) -> WeightStore:
    """Deterministic random weights: zero-mean normals scaled by
    1/sqrt(fan_in) per group, biases zero.  Identical seeds produce
    bit-identical stores."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for layer in parameterized_layers(bound):
        spec = layer.spec
        parts = []
        if spec.kind is LayerKind.CONV:
            kh, kw = spec.kernel
            for g_in, g_out in layer.weight_splits():
                fan_in = kh * kw * g_in
                parts.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in),
                                        size=g_out * g_in * kh * kw))
        else:
            fan_in = layer.in_channels
            parts.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in),
                                    size=layer.out_channels * layer.in_channels))
        if spec.has_bias:
            parts.append(np.zeros(layer.out_channels))
        store[layer.layer_id] = np.concatenate(parts).astype(np.float32)
    return store


# ---------------------------------------------------------------------------
# binary file formats

_TENSOR_MAGIC = b"ATTO"
_WEIGHTS_MAGIC = b"ATTW"
_FORMAT_VERSION = 1


def _write_dims(f: BinaryIO, shape: tuple[int, ...]) -> None:
    f.write(struct.pack("<I", len(shape)))
    for d in shape:
        f.write(struct.pack("<I", d))


def _read_dims(f: BinaryIO, what: str) -> tuple[int, ...]:
    raw = f.read(4)
    if len(raw) != 4:
        raise TensorFormatError(f"truncated {what}: missing rank")
    (rank,) = struct.unpack("<I", raw)
    dims = []
    for _ in range(rank):
        raw = f.read(4)
        if len(raw) != 4:
            raise TensorFormatError(f"truncated {what}: missing dims")
        dims.append(struct.unpack("<I", raw)[0])
    return tuple(dims)


def _read_values(f: BinaryIO, count: int, what: str) -> np.ndarray:
    raw = f.read(4 * count)
    if len(raw) != 4 * count:
        raise TensorFormatError(f"truncated {what}: expected {count} values")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def _check_header(f: BinaryIO, magic: bytes, what: str) -> None:
    if f.read(4) != magic:
        raise TensorFormatError(f"not a {what} file (bad magic)")
    version = f.read(1)
    if len(version) != 1 or version[0] != _FORMAT_VERSION:
        raise TensorFormatError(f"unsupported {what} format version")


def save_tensor(t: Tensor, f: BinaryIO) -> None:
    """Tensor file: magic ``ATTO``, version byte, u32 rank, u32 dims, then
    little-endian float32 values in row-major order."""
    f.write(_TENSOR_MAGIC)
    f.write(bytes([_FORMAT_VERSION]))
    _write_dims(f, t.data.shape)
    f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_tensor(f: BinaryIO) -> Tensor:
    _check_header(f, _TENSOR_MAGIC, "tensor")
    dims = _read_dims(f, "tensor")
    if len(dims) != 3:
        raise TensorFormatError(f"tensor must be rank 3, got rank {len(dims)}")
    count = int(np.prod(dims)) if dims else 0
    values = _read_values(f, count, "tensor")
    return Tensor(values.reshape(dims))


def save_weights(store: WeightStore, f: BinaryIO) -> None:
    """Weight file: magic ``ATTW``, version byte, u32 entry count, then per
    entry a u16 name length, the name bytes, rank/dims, and the values."""
    f.write(_WEIGHTS_MAGIC)
    f.write(bytes([_FORMAT_VERSION]))
    f.write(struct.pack("<I", len(store)))
    for name in store:
        encoded = name.encode("utf-8")
        f.write(struct.pack("<H", len(encoded)))
        f.write(encoded)
        values = store[name]
        _write_dims(f, values.shape)
        f.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_weights(f: BinaryIO) -> WeightStore:
    _check_header(f, _WEIGHTS_MAGIC, "weight")
    raw = f.read(4)
    if len(raw) != 4:
        raise TensorFormatError("truncated weight file: missing entry count")
    (count,) = struct.unpack("<I", raw)
    store = WeightStore()
    for _ in range(count):
        raw = f.read(2)
        if len(raw) != 2:
            raise TensorFormatError("truncated weight file: missing name length")
        (name_len,) = struct.unpack("<H", raw)
        name = f.read(name_len).decode("utf-8")
        dims = _read_dims(f, "weight entry")
        values = _read_values(f, int(np.prod(dims)) if dims else 0, f"entry {name}")
        store[name] = values.reshape(dims)
    return store
