"""Exact parameter and multiply-add accounting per layer and per network.

The convention is one multiply-accumulate per weight application: a conv
costs its weight count (bias excluded) times its output area, a dense layer
costs in*out.  Bias additions, pooling, residual adds, and softmax cost
nothing.  When a conv enables the optional `normalize` stage, it contributes
2*out_channels parameters and zero mult-adds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .graph import (
    BoundLayer,
    BoundNetwork,
    LayerKind,
    TensorShape,
    infer_shapes,
)

__all__ = [
    "LayerComplexity",
    "ComplexityReport",
    "layer_param_count",
    "layer_weight_count",
    "layer_mult_adds",
    "count_params",
    "count_mult_adds",
    "analyze_network",
]


@dataclass(frozen=True)
class LayerComplexity:
    layer_id: str
    params: int
    mult_adds: int


@dataclass(frozen=True)
class ComplexityReport:
    """Per-layer and total parameter/mult-add counts at one input shape."""

    input_shape: TensorShape
    per_layer: tuple[LayerComplexity, ...]
    total_params: int
    total_mult_adds: int

    def __post_init__(self):
        if self.total_params != sum(e.params for e in self.per_layer):
            raise ValueError("total_params does not match the per-layer sum")
        if self.total_mult_adds != sum(e.mult_adds for e in self.per_layer):
            raise ValueError("total_mult_adds does not match the per-layer sum")
        if any(e.params < 0 or e.mult_adds < 0 for e in self.per_layer):
            raise ValueError("complexity counts must be non-negative")

    def params_millions(self) -> float:
        return self.total_params / 1e6

    def mult_adds_millions(self) -> float:
        return self.total_mult_adds / 1e6


def layer_weight_count(layer: BoundLayer) -> int:
    """Multiplicative weights of a layer (biases and normalization excluded)."""
    spec = layer.spec
    if spec.kind is LayerKind.CONV:
        kh, kw = spec.kernel
        return sum(kh * kw * gi * go for gi, go in layer.weight_splits())
    if spec.kind is LayerKind.DENSE:
        return layer.in_channels * layer.out_channels
    return 0


def layer_param_count(layer: BoundLayer) -> int:
    """Stored parameters of a layer, including bias and normalization."""
    spec = layer.spec
    count = layer_weight_count(layer)
    if count and spec.has_bias:
        count += layer.out_channels
    if spec.kind is LayerKind.CONV and spec.normalize:
        count += 2 * layer.out_channels
    return count


def layer_mult_adds(layer: BoundLayer, out_shape: TensorShape) -> int:
    """Multiply-adds of one layer given its output shape."""
    spec = layer.spec
    if spec.kind is LayerKind.CONV:
        return layer_weight_count(layer) * out_shape.height * out_shape.width
    if spec.kind is LayerKind.DENSE:
        return layer.in_channels * layer.out_channels
    return 0


def _with_input(bound: BoundNetwork, input_shape: TensorShape | None):
    """Retarget the network to an analysis resolution.

    The head pool acts as a global pool, so at a non-native resolution its
    window is re-fit to whatever spatial extent arrives (it costs nothing
    either way); every other layer keeps its geometry.
    """
    if input_shape is None or input_shape == bound.net.input_shape:
        return bound.net, bound.net.input_shape
    from .graph import _propagate_shapes  # tolerant walk, avoids a cycle at import

    net = replace(bound.net, input_shape=input_shape)
    entries = dict(_propagate_shapes(net, strict=False))
    last_conv = (f"m{len(net.modules):02d}.decompress" if net.modules else "stem.pool")
    pre_pool = entries.get(last_conv)
    if pre_pool is not None and (pre_pool.height, pre_pool.width) != (1, 1):
        net = replace(net, head_pool=replace(
            net.head_pool, kernel=(pre_pool.height, pre_pool.width), stride=1, padding=0))
    return net, input_shape


def analyze_network(bound: BoundNetwork,
                    input_shape: TensorShape | None = None) -> ComplexityReport:
    """Full complexity report (both params and mult-adds) for a bound network.

    Parameter counts are independent of the input resolution; mult-adds are
    evaluated at `input_shape` (the network's own input shape by default).
    """
    net, shape = _with_input(bound, input_shape)
    shapes = dict(infer_shapes(net))
    per_layer = []
    for layer in bound.layers:
        per_layer.append(LayerComplexity(
            layer.layer_id,
            layer_param_count(layer),
            layer_mult_adds(layer, shapes[layer.layer_id]),
        ))
    return ComplexityReport(
        input_shape=shape,
        per_layer=tuple(per_layer),
        total_params=sum(e.params for e in per_layer),
        total_mult_adds=sum(e.mult_adds for e in per_layer),
    )


def count_params(bound: BoundNetwork) -> ComplexityReport:
    """Parameter side of the accounting (mult-add fields left at zero)."""
    per_layer = tuple(
        LayerComplexity(layer.layer_id, layer_param_count(layer), 0)
        for layer in bound.layers
    )
    return ComplexityReport(
        input_shape=bound.net.input_shape,
        per_layer=per_layer,
        total_params=sum(e.params for e in per_layer),
        total_mult_adds=0,
    )


def count_mult_adds(bound: BoundNetwork,
                    input_shape: TensorShape | None = None) -> ComplexityReport:
    """Mult-add side of the accounting (param fields left at zero)."""
    net, shape = _with_input(bound, input_shape)
    shapes = dict(infer_shapes(net))
    per_layer = tuple(
        LayerComplexity(layer.layer_id, 0, layer_mult_adds(layer, shapes[layer.layer_id]))
        for layer in bound.layers
    )
    return ComplexityReport(
        input_shape=shape,
        per_layer=per_layer,
        total_params=0,
        total_mult_adds=sum(e.mult_adds for e in per_layer),
    )
