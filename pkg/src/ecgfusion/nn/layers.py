"""Layer descriptions, shape inference and static cost accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class Conv2d:
    out_channels: int
    kernel_h: int
    kernel_w: int
    pad_h: int = 0
    pad_w: int = 0
    stride_h: int = 1
    stride_w: int = 1
    bias: bool = False


@dataclass(frozen=True)
class MaxPool:
    kernel_h: int
    kernel_w: int
    stride_h: int
    stride_w: int


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class FullyConnected:
    out_features: int
    bias: bool = False


LayerSpec = Union[Conv2d, MaxPool, Relu, FullyConnected]
Dims = tuple


@dataclass(frozen=True)
class NetworkSpec:
    """An input shape ``(C, H, W)`` followed by an ordered layer list.

    ``descriptor`` is the canonical preset string used by the model file
    format; hand-built specs leave it ``None``.
    """

    input_dims: tuple
    layers: tuple
    num_classes: int
    descriptor: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_dims) != 3 or min(self.input_dims) < 1:
            raise ShapeMismatch(f"input_dims must be three positive ints, got {self.input_dims}")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")

    @property
    def frames(self) -> int:
        return self.input_dims[2]


def _check_positive(layer_idx, layer, *values):
    if any(v < 1 for v in values):
        raise ShapeMismatch(f"layer {layer_idx} ({layer}) has a non-positive dimension")


def _layer_out(idx: int, layer, dims: Dims) -> Dims:
    if isinstance(layer, Conv2d):
        _check_positive(idx, layer, layer.out_channels, layer.kernel_h, layer.kernel_w,
                        layer.stride_h, layer.stride_w, layer.pad_h + 1, layer.pad_w + 1)
        if len(dims) != 3:
            raise ShapeMismatch(f"layer {idx} ({layer}) needs a C x H x W input, got {dims}")
        _, h, w = dims
        span_h = h + 2 * layer.pad_h - layer.kernel_h
        span_w = w + 2 * layer.pad_w - layer.kernel_w
        if span_h < 0 or span_w < 0:
            raise ShapeMismatch(
                f"layer {idx}: kernel {layer.kernel_h}x{layer.kernel_w} exceeds padded input {dims}")
        # trailing rows/cols that do not fit a full stride are dropped (floor rule)
        return (layer.out_channels, span_h // layer.stride_h + 1, span_w // layer.stride_w + 1)
    if isinstance(layer, MaxPool):
        _check_positive(idx, layer, layer.kernel_h, layer.kernel_w, layer.stride_h, layer.stride_w)
        if len(dims) != 3:
            raise ShapeMismatch(f"layer {idx} ({layer}) needs a C x H x W input, got {dims}")
        c, h, w = dims
        span_h, span_w = h - layer.kernel_h, w - layer.kernel_w
        if span_h < 0 or span_w < 0:
            raise ShapeMismatch(f"layer {idx}: pool window exceeds input {dims}")
        if span_h % layer.stride_h or span_w % layer.stride_w:
            raise ShapeMismatch(f"layer {idx}: pool {layer} does not tile input {dims} exactly")
        return (c, span_h // layer.stride_h + 1, span_w // layer.stride_w + 1)
    if isinstance(layer, Relu):
        return dims
    if isinstance(layer, FullyConnected):
        _check_positive(idx, layer, layer.out_features)
        return (layer.out_features,)
    raise TypeError(f"unknown layer type: {layer!r}")


def infer_shapes(spec: NetworkSpec) -> list:
    """Return the output dims of every layer, in order."""
    dims = spec.input_dims
    out = []
    for i, layer in enumerate(spec.layers):
        dims = _layer_out(i, layer, dims)
        out.append(dims)
    return out


def validate(spec: NetworkSpec) -> list:
    shapes = infer_shapes(spec)
    final = shapes[-1] if shapes else spec.input_dims
    if math.prod(final) != spec.num_classes or len(final) != 1:
        raise ShapeMismatch(f"network emits {final}, expected ({spec.num_classes},)")
    return shapes


def param_shapes(spec: NetworkSpec) -> list:
    """Return ``(name, shape)`` for each parameter tensor in layer order."""
    dims = spec.input_dims
    out = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            out.append((f"{i}.weight", (layer.out_channels, dims[0], layer.kernel_h, layer.kernel_w)))
            if layer.bias:
                out.append((f"{i}.bias", (layer.out_channels,)))
        elif isinstance(layer, FullyConnected):
            out.append((f"{i}.weight", (layer.out_features, math.prod(dims))))
            if layer.bias:
                out.append((f"{i}.bias", (layer.out_features,)))
        dims = _layer_out(i, layer, dims)
    return out


def count_params(spec: NetworkSpec) -> int:
    return sum(math.prod(shape) for _, shape in param_shapes(spec))


def count_flops(spec: NetworkSpec) -> int:
    """Multiply-accumulate count of one forward pass (conv and FC only)."""
    dims = spec.input_dims
    total = 0
    for i, layer in enumerate(spec.layers):
        out = _layer_out(i, layer, dims)
        if isinstance(layer, Conv2d):
            total += math.prod(out) * dims[0] * layer.kernel_h * layer.kernel_w
        elif isinstance(layer, FullyConnected):
            total += layer.out_features * math.prod(dims)
        dims = out
    return total
