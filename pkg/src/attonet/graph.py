"""Layer/module/network data model, structural validation, channel binding,
and shape propagation.

All types are immutable values; every operation here is a pure function, so
anything in this module is safe to share across threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

from .errors import ChannelMismatchError, ShapeUnderflowError, SpecFormatError

__all__ = [
    "TensorShape",
    "LayerKind",
    "LayerSpec",
    "ModuleSpec",
    "NetworkSpec",
    "Violation",
    "ValidationReport",
    "BoundLayer",
    "BoundNetwork",
    "validate",
    "bind_channels",
    "infer_shapes",
    "conv_out_hw",
    "group_splits",
    "to_document",
    "from_document",
    "dumps",
    "loads",
    "spec_digest",
]


@dataclass(frozen=True)
class TensorShape:
    """Channels-first shape of a feature map."""

    channels: int
    height: int
    width: int

    def __post_init__(self):
        for name in ("channels", "height", "width"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"TensorShape.{name} must be a positive integer, got {v!r}")

    @property
    def size(self) -> int:
        return self.channels * self.height * self.width


class LayerKind(str, Enum):
    CONV = "conv"
    MAX_POOL = "max_pool"
    AVG_POOL = "avg_pool"
    DENSE = "dense"
    SOFTMAX = "softmax"
    IDENTITY = "identity"


# Fields that are meaningful per layer kind; anything else must stay at its
# default for the spec to be structurally valid.
_GEOMETRY_KINDS = {LayerKind.CONV, LayerKind.MAX_POOL, LayerKind.AVG_POOL}


@dataclass(frozen=True)
class LayerSpec:
    """One layer: convolution, pooling, dense, softmax, or identity.

    `kernel`, `stride`, `padding` apply to convolutions and pools;
    `out_channels` to convolutions and dense layers; `groups` to
    convolutions only.  `activation` is "relu" or "none" and is honored by
    the execution engine but ignored by complexity accounting.  `normalize`
    marks an optional per-conv normalization stage (off by default; counted
    as 2*out_channels parameters only when enabled).
    """

    kind: LayerKind
    kernel: tuple[int, int] | None = None
    out_channels: int | None = None
    groups: int = 1
    stride: int = 1
    padding: int = 0
    has_bias: bool = False
    activation: str = "none"
    normalize: bool = False

    def __post_init__(self):
        if self.kernel is not None:
            kh, kw = self.kernel
            if kh < 1 or kw < 1:
                raise ValueError(f"kernel must be positive, got {self.kernel}")
            object.__setattr__(self, "kernel", (int(kh), int(kw)))
        if self.out_channels is not None and self.out_channels < 1:
            raise ValueError(f"out_channels must be positive, got {self.out_channels}")
        if self.groups < 1:
            raise ValueError(f"groups must be >= 1, got {self.groups}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")
        if self.activation not in ("none", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    # -- convenience constructors used by the builders ---------------------

    @staticmethod
    def conv(out_channels: int, kernel: int | tuple[int, int] = 1, *, groups: int = 1,
             stride: int = 1, padding: int | None = None, bias: bool = False,
             activation: str = "none", normalize: bool = False) -> "LayerSpec":
        if isinstance(kernel, int):
            kernel = (kernel, kernel)
        if padding is None:
            padding = kernel[0] // 2  # "same"-style default
        return LayerSpec(LayerKind.CONV, kernel=kernel, out_channels=out_channels,
                         groups=groups, stride=stride, padding=padding, has_bias=bias,
                         activation=activation, normalize=normalize)

    @staticmethod
    def max_pool(kernel: int, *, stride: int = 2, padding: int | None = None) -> "LayerSpec":
        if padding is None:
            padding = kernel // 2
        return LayerSpec(LayerKind.MAX_POOL, kernel=(kernel, kernel), stride=stride,
                         padding=padding)

    @staticmethod
    def avg_pool(kernel: int, *, stride: int = 1, padding: int = 0) -> "LayerSpec":
        return LayerSpec(LayerKind.AVG_POOL, kernel=(kernel, kernel), stride=stride,
                         padding=padding)

    @staticmethod
    def dense(out_channels: int, *, bias: bool = True) -> "LayerSpec":
        return LayerSpec(LayerKind.DENSE, out_channels=out_channels, has_bias=bias)

    @staticmethod
    def softmax() -> "LayerSpec":
        return LayerSpec(LayerKind.SOFTMAX)

    @staticmethod
    def identity() -> "LayerSpec":
        return LayerSpec(LayerKind.IDENTITY)


@dataclass(frozen=True)
class ModuleSpec:
    """One residual module: a four-layer main path plus a shortcut.

    Type A carries an identity shortcut and a non-strided grouped conv;
    Type B carries a strided-or-not 1x1 projection shortcut.  `free_micro`
    marks a module whose widths are placeholders open to design exploration.
    """

    module_type: str  # "A" | "B"
    compress: LayerSpec
    group_conv: LayerSpec
    mix: LayerSpec
    decompress: LayerSpec
    shortcut: LayerSpec  # identity, or a 1x1 conv projection
    free_micro: bool = False

    def __post_init__(self):
        if self.module_type not in ("A", "B"):
            raise ValueError(f"module_type must be 'A' or 'B', got {self.module_type!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """A full network: stem conv + pool, ordered modules, pooled dense head."""

    name: str
    input_shape: TensorShape
    stem_conv: LayerSpec
    stem_pool: LayerSpec
    modules: tuple[ModuleSpec, ...]
    head_pool: LayerSpec
    head_dense: LayerSpec
    head_softmax: LayerSpec

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))


def module_id(index: int) -> str:
    """1-based module id, e.g. ``m01``."""
    return f"m{index:02d}"


_MODULE_ROLES = ("compress", "group_conv", "mix", "decompress", "shortcut")


def iter_layers(net: NetworkSpec) -> Iterator[tuple[str, LayerSpec]]:
    """Yield ``(layer_id, spec)`` in topological order.

    Within a module the order is compress, group_conv, mix, decompress,
    shortcut; the shortcut entry is present even when it is an identity.
    """
    yield "stem.conv", net.stem_conv
    yield "stem.pool", net.stem_pool
    for i, mod in enumerate(net.modules, 1):
        mid = module_id(i)
        for role in _MODULE_ROLES:
            yield f"{mid}.{role}", getattr(mod, role)
    yield "head.pool", net.head_pool
    yield "head.dense", net.head_dense
    yield "head.softmax", net.head_softmax


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    message: str
    severity: str = "error"  # "error" | "warning"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == "error")

    @property
    def warnings(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def conv_out_hw(in_hw: int, kernel: int, stride: int, padding: int) -> int:
    """Spatial output extent of a conv/pool window."""
    return (in_hw + 2 * padding - kernel) // stride + 1


def group_splits(total: int, groups: int) -> list[int]:
    """Distribute `total` channels over `groups` as evenly as possible,
    larger groups first (7 over 4 -> [2, 2, 2, 1])."""
    base, rem = divmod(total, groups)
    return [base + 1] * rem + [base] * (groups - rem)


def _check_layer_fields(layer_id: str, layer: LayerSpec, out: list[Violation]) -> None:
    kind = layer.kind

    def err(code, msg):
        out.append(Violation(code, layer_id, msg))

    if kind == LayerKind.CONV:
        if layer.kernel is None:
            err("missing_kernel", "convolution requires a kernel")
        if layer.out_channels is None:
            err("missing_out_channels", "convolution requires out_channels")
        if layer.stride not in (1, 2):
            err("stride_out_of_range", f"stride must be 1 or 2, got {layer.stride}")
    elif kind in (LayerKind.MAX_POOL, LayerKind.AVG_POOL):
        if layer.kernel is None:
            err("missing_kernel", "pooling requires a kernel")
        if layer.out_channels is not None:
            err("unexpected_out_channels", "pooling does not take out_channels")
        if layer.groups != 1:
            err("unexpected_groups", "pooling does not take groups")
        if layer.stride not in (1, 2):
            err("stride_out_of_range", f"stride must be 1 or 2, got {layer.stride}")
    elif kind == LayerKind.DENSE:
        if layer.out_channels is None:
            err("missing_out_channels", "dense requires out_channels")
        if layer.kernel is not None:
            err("unexpected_kernel", "dense does not take a kernel")
        if layer.groups != 1:
            err("unexpected_groups", "dense does not take groups")
    else:  # softmax, identity
        if layer.kernel is not None or layer.out_channels is not None:
            err("unexpected_geometry", f"{kind.value} takes no kernel/out_channels")
        if layer.groups != 1 or layer.stride != 1:
            err("unexpected_geometry", f"{kind.value} takes no groups/stride")


def _expect_kind(layer_id: str, layer: LayerSpec, kind: LayerKind, out: list[Violation]) -> None:
    if layer.kind is not kind:
        out.append(Violation("wrong_kind", layer_id,
                             f"expected {kind.value}, got {layer.kind.value}"))


def validate(net: NetworkSpec) -> ValidationReport:
    """Collect every structural violation; an empty error list means valid.

    Violations are data, not exceptions, and come back in a deterministic
    walk order (stem, modules in index order, head).  Warnings (uneven
    channel groups, anomalous width profiles) do not invalidate a network.
    """
    out: list[Violation] = []

    _expect_kind("stem.conv", net.stem_conv, LayerKind.CONV, out)
    if net.stem_pool.kind not in (LayerKind.MAX_POOL, LayerKind.AVG_POOL):
        out.append(Violation("wrong_kind", "stem.pool", "stem pool must be a pooling layer"))
    _expect_kind("head.pool", net.head_pool, LayerKind.AVG_POOL, out)
    _expect_kind("head.dense", net.head_dense, LayerKind.DENSE, out)
    _expect_kind("head.softmax", net.head_softmax, LayerKind.SOFTMAX, out)

    for layer_id, layer in iter_layers(net):
        _check_layer_fields(layer_id, layer, out)

    # Module rules and the channel chain.  The walk mirrors bind_channels but
    # records problems instead of raising.
    channels = net.input_shape.channels

    def check_groups(layer_id: str, layer: LayerSpec, in_ch: int) -> None:
        if layer.kind is not LayerKind.CONV or layer.out_channels is None:
            return
        if layer.groups > in_ch or layer.groups > layer.out_channels:
            out.append(Violation("groups_exceed_channels", layer_id,
                                 f"groups={layer.groups} exceeds in={in_ch} "
                                 f"or out={layer.out_channels}"))
        elif in_ch % layer.groups or layer.out_channels % layer.groups:
            out.append(Violation("uneven_groups", layer_id,
                                 f"groups={layer.groups} does not divide in={in_ch} "
                                 f"or out={layer.out_channels} evenly",
                                 severity="warning"))

    if net.stem_conv.kind is LayerKind.CONV and net.stem_conv.out_channels:
        check_groups("stem.conv", net.stem_conv, channels)
        channels = net.stem_conv.out_channels

    for i, mod in enumerate(net.modules, 1):
        mid = module_id(i)
        main_ok = all(
            layer.kind is LayerKind.CONV and layer.out_channels is not None
            for layer in (mod.compress, mod.group_conv, mod.mix, mod.decompress)
        )
        if not main_ok:
            out.append(Violation("module_main_path", mid,
                                 "main path must be four convolutions"))
            continue

        if mod.module_type == "A":
            if mod.shortcut.kind is not LayerKind.IDENTITY:
                out.append(Violation("type_a_shortcut", mid,
                                     "Type A requires an identity shortcut"))
            if mod.group_conv.stride != 1:
                out.append(Violation("type_a_stride", mid,
                                     "Type A grouped conv must be non-strided"))
        else:
            if mod.shortcut.kind is not LayerKind.CONV:
                out.append(Violation("type_b_shortcut", mid,
                                     "Type B requires a 1x1 projection shortcut"))
            else:
                if mod.shortcut.kernel != (1, 1):
                    out.append(Violation("projection_kernel", f"{mid}.shortcut",
                                         "projection shortcut must be a 1x1 conv"))
                if mod.shortcut.stride != mod.group_conv.stride:
                    out.append(Violation("projection_stride_mismatch", f"{mid}.shortcut",
                                         "projection stride must match the grouped conv"))

        shortcut_out = (mod.shortcut.out_channels
                        if mod.shortcut.kind is LayerKind.CONV else channels)
        if shortcut_out != mod.decompress.out_channels:
            out.append(Violation("residual_shape_mismatch", mid,
                                 f"decompress out={mod.decompress.out_channels} != "
                                 f"shortcut out={shortcut_out}"))

        check_groups(f"{mid}.compress", mod.compress, channels)
        check_groups(f"{mid}.group_conv", mod.group_conv, mod.compress.out_channels)
        check_groups(f"{mid}.mix", mod.mix, mod.group_conv.out_channels)
        check_groups(f"{mid}.decompress", mod.decompress, mod.mix.out_channels)
        if mod.shortcut.kind is LayerKind.CONV and mod.shortcut.out_channels:
            check_groups(f"{mid}.shortcut", mod.shortcut, channels)

        if mod.mix.out_channels > mod.group_conv.out_channels:
            out.append(Violation("width_profile_anomaly", f"{mid}.mix",
                                 f"mix widens the grouped features "
                                 f"({mod.group_conv.out_channels} -> {mod.mix.out_channels}); "
                                 "possible transcription slip",
                                 severity="warning"))

        channels = mod.decompress.out_channels

    # Tolerant shape walk: zero/negative dims and a dense layer applied before
    # the spatial extent collapses are both structural errors.
    try:
        entries = _propagate_shapes(net, strict=False)
    except ValueError:
        entries = []
    for layer_id, shape in entries:
        if shape is None:
            out.append(Violation("shape_underflow", layer_id,
                                 "spatial dimension reached zero"))
            break
    if entries and entries[-1][1] is not None:
        # find the shape entering head.dense
        pre_dense = dict(entries).get("head.pool")
        if pre_dense is not None and (pre_dense.height, pre_dense.width) != (1, 1):
            out.append(Violation("dense_before_collapse", "head.dense",
                                 f"dense applied at spatial "
                                 f"{pre_dense.height}x{pre_dense.width}, expected 1x1"))

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# channel binding


@dataclass(frozen=True)
class BoundLayer:
    """A layer annotated with its resolved input/output channel counts."""

    layer_id: str
    spec: LayerSpec
    in_channels: int
    out_channels: int

    def weight_splits(self) -> list[tuple[int, int]]:
        """Per-group (in, out) channel widths for a convolution."""
        if self.spec.kind is not LayerKind.CONV:
            raise ValueError(f"{self.layer_id} is not a convolution")
        g = self.spec.groups
        return list(zip(group_splits(self.in_channels, g),
                        group_splits(self.out_channels, g)))


@dataclass(frozen=True)
class BoundNetwork:
    net: NetworkSpec
    layers: tuple[BoundLayer, ...]

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {b.layer_id: b for b in self.layers})

    def __getitem__(self, layer_id: str) -> BoundLayer:
        return self._by_id[layer_id]

    def __contains__(self, layer_id: str) -> bool:
        return layer_id in self._by_id


def bind_channels(net: NetworkSpec) -> BoundNetwork:
    """Annotate every layer with concrete in/out channels.

    Each layer's input width is its predecessor's output width; a module's
    shortcut binds to the module input, and the residual add carries the
    decompress width forward.  Raises ChannelMismatchError when a grouped
    conv cannot split its channels.
    """
    bound: list[BoundLayer] = []

    def bind(layer_id: str, layer: LayerSpec, in_ch: int) -> int:
        if layer.kind is LayerKind.CONV:
            if layer.out_channels is None:
                raise ChannelMismatchError(layer_id, "convolution without out_channels")
            if layer.groups > in_ch or layer.groups > layer.out_channels:
                raise ChannelMismatchError(
                    layer_id, f"groups={layer.groups} exceeds in={in_ch} "
                              f"or out={layer.out_channels}")
            out_ch = layer.out_channels
        elif layer.kind is LayerKind.DENSE:
            out_ch = layer.out_channels if layer.out_channels else in_ch
        else:
            out_ch = in_ch
        bound.append(BoundLayer(layer_id, layer, in_ch, out_ch))
        return out_ch

    ch = net.input_shape.channels
    ch = bind("stem.conv", net.stem_conv, ch)
    ch = bind("stem.pool", net.stem_pool, ch)
    for i, mod in enumerate(net.modules, 1):
        mid = module_id(i)
        module_in = ch
        ch = bind(f"{mid}.compress", mod.compress, module_in)
        ch = bind(f"{mid}.group_conv", mod.group_conv, ch)
        ch = bind(f"{mid}.mix", mod.mix, ch)
        main_out = bind(f"{mid}.decompress", mod.decompress, ch)
        shortcut_out = bind(f"{mid}.shortcut", mod.shortcut, module_in)
        if shortcut_out != main_out:
            raise ChannelMismatchError(
                mid, f"residual add with {main_out} vs {shortcut_out} channels")
        ch = main_out
    ch = bind("head.pool", net.head_pool, ch)
    ch = bind("head.dense", net.head_dense, ch)
    bind("head.softmax", net.head_softmax, ch)
    return BoundNetwork(net, tuple(bound))


# ---------------------------------------------------------------------------
# shape propagation


def _layer_shape(layer: LayerSpec, shape: TensorShape, out_ch: int) -> TensorShape | None:
    """Output shape of a single layer, or None on spatial underflow."""
    if layer.kind in _GEOMETRY_KINDS:
        kh, kw = layer.kernel
        h = conv_out_hw(shape.height, kh, layer.stride, layer.padding)
        w = conv_out_hw(shape.width, kw, layer.stride, layer.padding)
        if h < 1 or w < 1:
            return None
        return TensorShape(out_ch, h, w)
    if layer.kind is LayerKind.DENSE:
        return TensorShape(out_ch, 1, 1)
    return TensorShape(out_ch, shape.height, shape.width)


def _propagate_shapes(net: NetworkSpec, strict: bool) -> list[tuple[str, TensorShape | None]]:
    """Shape walk shared by validate (tolerant) and infer_shapes (strict).

    Channels are carried leniently (a conv/dense without out_channels passes
    its input through) so the walk is total even on structurally broken
    networks; channel correctness is bind_channels' and validate's job.
    """
    entries: list[tuple[str, TensorShape | None]] = []

    def push(layer_id: str, layer: LayerSpec, shape_in: TensorShape) -> TensorShape | None:
        if layer.kind is LayerKind.DENSE and (shape_in.height, shape_in.width) != (1, 1):
            if strict:
                raise ValueError(f"{layer_id}: dense before spatial collapse "
                                 f"({shape_in.height}x{shape_in.width})")
        out_ch = shape_in.channels
        if layer.kind in (LayerKind.CONV, LayerKind.DENSE) and layer.out_channels:
            out_ch = layer.out_channels
        if layer.kind in _GEOMETRY_KINDS and layer.kernel is None:
            shape = None  # unpropagatable; field checks flag it
        else:
            shape = _layer_shape(layer, shape_in, out_ch)
        if shape is None and strict:
            raise ShapeUnderflowError(layer_id, f"from {shape_in.height}x{shape_in.width} "
                                                f"with kernel {layer.kernel}, "
                                                f"stride {layer.stride}, pad {layer.padding}")
        entries.append((layer_id, shape))
        return shape

    shape = net.input_shape
    shape = push("stem.conv", net.stem_conv, shape)
    if shape is None:
        return entries
    shape = push("stem.pool", net.stem_pool, shape)
    if shape is None:
        return entries
    for i, mod in enumerate(net.modules, 1):
        mid = module_id(i)
        module_in = shape
        shape = push(f"{mid}.compress", mod.compress, module_in)
        if shape is None:
            return entries
        for role in ("group_conv", "mix", "decompress"):
            shape = push(f"{mid}.{role}", getattr(mod, role), shape)
            if shape is None:
                return entries
        sc = push(f"{mid}.shortcut", mod.shortcut, module_in)
        if sc is None:
            return entries
        # residual add: decompress output carries forward (validated equal)
    shape = push("head.pool", net.head_pool, shape)
    if shape is None:
        return entries
    shape = push("head.dense", net.head_dense, shape)
    push("head.softmax", net.head_softmax, shape)
    return entries


def infer_shapes(net: NetworkSpec) -> list[tuple[str, TensorShape]]:
    """Propagate the input shape through every layer, in topological order.

    Conv/pool spatial size follows floor((in + 2*pad - kernel)/stride) + 1.
    Expects a network that validates cleanly; raises ShapeUnderflowError if
    any dimension reaches zero.
    """
    return [(lid, s) for lid, s in _propagate_shapes(net, strict=True)]


# ---------------------------------------------------------------------------
# serialization

_LAYER_KEYS = {"kind", "kernel", "out", "groups", "stride", "pad", "bias", "act", "norm"}


def _layer_to_doc(layer: LayerSpec) -> dict:
    doc: dict = {"kind": layer.kind.value}
    if layer.kernel is not None:
        doc["kernel"] = list(layer.kernel)
    if layer.out_channels is not None:
        doc["out"] = layer.out_channels
    if layer.kind is LayerKind.CONV:
        doc["groups"] = layer.groups
        doc["stride"] = layer.stride
        doc["pad"] = layer.padding
        doc["bias"] = layer.has_bias
        if layer.activation != "none":
            doc["act"] = layer.activation
        if layer.normalize:
            doc["norm"] = True
    elif layer.kind in (LayerKind.MAX_POOL, LayerKind.AVG_POOL):
        doc["stride"] = layer.stride
        doc["pad"] = layer.padding
    elif layer.kind is LayerKind.DENSE:
        doc["bias"] = layer.has_bias
    return doc


def _layer_from_doc(doc: dict, where: str) -> LayerSpec:
    if not isinstance(doc, dict):
        raise SpecFormatError(f"{where}: layer must be an object")
    unknown = set(doc) - _LAYER_KEYS
    if unknown:
        raise SpecFormatError(f"{where}: unknown layer keys {sorted(unknown)}")
    if "kind" not in doc:
        raise SpecFormatError(f"{where}: layer requires a kind")
    try:
        kind = LayerKind(doc["kind"])
    except ValueError:
        raise SpecFormatError(f"{where}: unknown layer kind {doc['kind']!r}") from None
    kernel = tuple(doc["kernel"]) if "kernel" in doc else None
    if kernel is not None and len(kernel) != 2:
        raise SpecFormatError(f"{where}: kernel must be [kh, kw]")
    try:
        return LayerSpec(
            kind,
            kernel=kernel,
            out_channels=doc.get("out"),
            groups=doc.get("groups", 1),
            stride=doc.get("stride", 1),
            padding=doc.get("pad", 0),
            has_bias=doc.get("bias", False),
            activation=doc.get("act", "none"),
            normalize=doc.get("norm", False),
        )
    except (TypeError, ValueError) as exc:
        raise SpecFormatError(f"{where}: {exc}") from None


_MODULE_KEYS = {"type", "compress", "group_conv", "mix", "decompress", "shortcut", "free"}
_TOP_KEYS = {"name", "input_shape", "stem", "modules", "head"}


def to_document(net: NetworkSpec) -> dict:
    """Plain-JSON document form of a network."""
    modules = []
    for mod in net.modules:
        doc = {
            "type": mod.module_type,
            "compress": _layer_to_doc(mod.compress),
            "group_conv": _layer_to_doc(mod.group_conv),
            "mix": _layer_to_doc(mod.mix),
            "decompress": _layer_to_doc(mod.decompress),
            "shortcut": _layer_to_doc(mod.shortcut),
        }
        if mod.free_micro:
            doc["free"] = True
        modules.append(doc)
    return {
        "name": net.name,
        "input_shape": {
            "channels": net.input_shape.channels,
            "height": net.input_shape.height,
            "width": net.input_shape.width,
        },
        "stem": {"conv": _layer_to_doc(net.stem_conv), "pool": _layer_to_doc(net.stem_pool)},
        "modules": modules,
        "head": {
            "pool": _layer_to_doc(net.head_pool),
            "dense": _layer_to_doc(net.head_dense),
            "softmax": _layer_to_doc(net.head_softmax),
        },
    }


def from_document(doc: dict) -> NetworkSpec:
    """Parse a network document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise SpecFormatError("network document must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SpecFormatError(f"unknown top-level keys {sorted(unknown)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise SpecFormatError(f"missing top-level keys {sorted(missing)}")

    shape_doc = doc["input_shape"]
    if not isinstance(shape_doc, dict) or set(shape_doc) != {"channels", "height", "width"}:
        raise SpecFormatError("input_shape requires exactly channels/height/width")
    try:
        input_shape = TensorShape(**shape_doc)
    except (TypeError, ValueError) as exc:
        raise SpecFormatError(f"input_shape: {exc}") from None

    stem = doc["stem"]
    if not isinstance(stem, dict) or set(stem) != {"conv", "pool"}:
        raise SpecFormatError("stem requires exactly conv/pool")
    head = doc["head"]
    if not isinstance(head, dict) or set(head) != {"pool", "dense", "softmax"}:
        raise SpecFormatError("head requires exactly pool/dense/softmax")

    modules = []
    if not isinstance(doc["modules"], list):
        raise SpecFormatError("modules must be an array")
    for i, mdoc in enumerate(doc["modules"], 1):
        where = module_id(i)
        if not isinstance(mdoc, dict):
            raise SpecFormatError(f"{where}: module must be an object")
        unknown = set(mdoc) - _MODULE_KEYS
        if unknown:
            raise SpecFormatError(f"{where}: unknown module keys {sorted(unknown)}")
        missing = (_MODULE_KEYS - {"free"}) - set(mdoc)
        if missing:
            raise SpecFormatError(f"{where}: missing module keys {sorted(missing)}")
        if mdoc["type"] not in ("A", "B"):
            raise SpecFormatError(f"{where}: module type must be 'A' or 'B'")
        modules.append(ModuleSpec(
            module_type=mdoc["type"],
            compress=_layer_from_doc(mdoc["compress"], f"{where}.compress"),
            group_conv=_layer_from_doc(mdoc["group_conv"], f"{where}.group_conv"),
            mix=_layer_from_doc(mdoc["mix"], f"{where}.mix"),
            decompress=_layer_from_doc(mdoc["decompress"], f"{where}.decompress"),
            shortcut=_layer_from_doc(mdoc["shortcut"], f"{where}.shortcut"),
            free_micro=bool(mdoc.get("free", False)),
        ))

    return NetworkSpec(
        name=str(doc["name"]),
        input_shape=input_shape,
        stem_conv=_layer_from_doc(stem["conv"], "stem.conv"),
        stem_pool=_layer_from_doc(stem["pool"], "stem.pool"),
        modules=tuple(modules),
        head_pool=_layer_from_doc(head["pool"], "head.pool"),
        head_dense=_layer_from_doc(head["dense"], "head.dense"),
        head_softmax=_layer_from_doc(head["softmax"], "head.softmax"),
    )


def dumps(net: NetworkSpec, *, indent: int | None = 2) -> str:
    """Serialize a network to JSON text (byte-stable for equal specs)."""
    return json.dumps(to_document(net), indent=indent, sort_keys=True)


def loads(text: str) -> NetworkSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFormatError(f"invalid JSON: {exc}") from None
    return from_document(doc)


def spec_digest(net: NetworkSpec) -> str:
    """Canonical content hash of a network (stable across runs/platforms)."""
    canonical = json.dumps(to_document(net), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
