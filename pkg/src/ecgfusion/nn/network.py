"""Model container, initialisation and whole-network forward/backward."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from . import kernels as K
from .layers import Conv2d, FullyConnected, MaxPool, NetworkSpec, Relu, param_shapes, validate


@dataclass(frozen=True)
class Model:
    """A network spec plus its parameter tensors, keyed ``"<layer>.weight"``.

    Parameter arrays are marked read-only; training produces new models.
    """

    spec: NetworkSpec
    params: dict = field(repr=False)

    def __post_init__(self):
        expected = param_shapes(self.spec)
        validate(self.spec)
        if [n for n, _ in expected] != list(self.params):
            raise ShapeMismatch(f"parameter names {list(self.params)} do not match spec")
        frozen = {}
        for name, shape in expected:
            arr = np.asarray(self.params[name])
            if arr.shape != tuple(shape):
                raise ShapeMismatch(f"{name}: shape {arr.shape}, spec implies {shape}")
            if arr.flags.writeable:
                arr = arr.copy()
                arr.flags.writeable = False
            frozen[name] = arr
        object.__setattr__(self, "params", frozen)

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype if self.params else np.dtype(np.float32)

    def astype(self, dtype) -> "Model":
        return Model(self.spec, {k: v.astype(dtype) for k, v in self.params.items()})

    def with_params(self, params: dict) -> "Model":
        return Model(self.spec, params)

    def num_scalars(self) -> int:
        return sum(v.size for v in self.params.values())


def init_model(spec: NetworkSpec, seed: int = 0, dtype=np.float32) -> Model:
    """Uniform ``[-b, b]`` weights with ``b = sqrt(6 / fan_in)``; zero biases.

    Draws come from numpy's PCG64 generator seeded with ``seed``, one tensor
    at a time in layer order.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = {}
    for name, shape in param_shapes(spec):
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        fan_in = math.prod(shape[1:])
        bound = math.sqrt(6.0 / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return Model(spec, params)


def zero_model(spec: NetworkSpec, dtype=np.float32) -> Model:
    return Model(spec, {n: np.zeros(s, dtype=dtype) for n, s in param_shapes(spec)})


@dataclass
class Trace:
    """Intermediate values of one forward pass (batch-first, channel-first)."""

    logits: np.ndarray
    probs: np.ndarray
    activations: list
    features: np.ndarray
    relu_inputs: dict
    pool_args: dict


def _prepare_input(spec: NetworkSpec, x, dtype):
    x = np.asarray(x, dtype=dtype)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.ndim != 4 or x.shape[1:] != spec.input_dims:
        raise ShapeMismatch(f"input shape {x.shape} does not match network input {spec.input_dims}")
    return K._to_nhwc(x), single


def _run(model: Model, x_nhwc, keep_cache: bool):
    """Forward through every layer.  Returns ``(logits, cache, outputs)``."""
    spec = model.spec
    a = x_nhwc
    flat = False
    cache = []
    outputs = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d):
            if flat:
                raise ShapeMismatch(f"layer {i}: convolution after a fully-connected layer")
            w = model.params[f"{i}.weight"]
            y, cols = K.conv2d_forward_nhwc(a, w, (layer.pad_h, layer.pad_w), (layer.stride_h, layer.stride_w))
            if layer.bias:
                y = y + model.params[f"{i}.bias"]
            cache.append((cols, a.shape) if keep_cache else None)
        elif isinstance(layer, MaxPool):
            y, arg = K.maxpool_forward_nhwc(a, (layer.kernel_h, layer.kernel_w), (layer.stride_h, layer.stride_w))
            cache.append((arg, a.shape))
        elif isinstance(layer, Relu):
            y = np.maximum(a, 0)
            cache.append(a if keep_cache else None)
        elif isinstance(layer, FullyConnected):
            pre_shape = None
            if not flat:
                pre_shape = a.shape
                a = K._to_nchw(a).reshape(a.shape[0], -1)
                flat = True
            y = a @ model.params[f"{i}.weight"].T
            if layer.bias:
                y = y + model.params[f"{i}.bias"]
            cache.append((a, pre_shape) if keep_cache else None)
        else:
            raise TypeError(f"unknown layer type: {layer!r}")
        a = y
        outputs.append(y)
    if not flat:
        a = K._to_nchw(a).reshape(a.shape[0], -1)
    return a, cache, outputs


def forward(model: Model, x, trace: bool = False):
    """Class probabilities for one input ``(C, H, W)`` or a batch.

    With ``trace=True`` also returns a :class:`Trace` holding per-layer
    activations and the penultimate feature vector.
    """
    xh, single = _prepare_input(model.spec, x, model.dtype)
    logits, cache, outputs = _run(model, xh, keep_cache=trace)
    probs = K.softmax(logits)
    if not trace:
        return probs[0] if single else probs
    acts = [K._to_nchw(o) if o.ndim == 4 else o for o in outputs]
    relu_inputs = {i: c for i, (c, l) in enumerate(zip(cache, model.spec.layers)) if isinstance(l, Relu)}
    pool_args = {i: c[0] for i, (c, l) in enumerate(zip(cache, model.spec.layers)) if isinstance(l, MaxPool)}
    features = acts[-2] if len(acts) > 1 else K._to_nchw(xh)
    features = features.reshape(features.shape[0], -1)
    t = Trace(logits, probs, acts, features, relu_inputs, pool_args)
    if single:
        t = Trace(logits[0], probs[0], [a[0] for a in acts], features[0],
                  {k: v[0] for k, v in relu_inputs.items()}, {k: v[0] for k, v in pool_args.items()})
        return probs[0], t
    return probs, t


def predict(model: Model, x, batch_size: int = 256):
    """Probabilities for a large batch, evaluated in chunks."""
    x = np.asarray(x)
    out = [forward(model, x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    if not out:
        return np.zeros((0, model.spec.num_classes), dtype=model.dtype)
    return np.concatenate(out)


def loss_and_grads(model: Model, x, labels, backward_scale: dict | None = None):
    """Mean cross-entropy over the batch and its parameter gradients.

    ``backward_scale`` maps a layer index to a factor applied to everything
    that layer's backward emits; it exists so the gradient checker can
    confirm that it notices a broken layer.
    """
    from ..optim import cross_entropy_batch

    xh, single = _prepare_input(model.spec, x, model.dtype)
    labels = np.atleast_1d(np.asarray(labels))
    logits, cache, _ = _run(model, xh, keep_cache=True)
    probs = K.softmax(logits)
    loss, g = cross_entropy_batch(probs, labels)
    n = xh.shape[0]
    g = g / n
    grads = {}
    spec = model.spec
    layers = spec.layers
    scale = backward_scale or {}
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        c = cache[i]
        if isinstance(layer, FullyConnected):
            a, pre_shape = c
            grads[f"{i}.weight"] = g.T @ a
            if layer.bias:
                grads[f"{i}.bias"] = g.sum(axis=0)
            if not _has_params_before(layers, i):
                g = None
            else:
                g = g @ model.params[f"{i}.weight"]
                if pre_shape is not None:
                    nb, hh, ww, cc = pre_shape
                    g = K._to_nhwc(g.reshape(nb, cc, hh, ww))
        elif isinstance(layer, Relu):
            g = g * (c > 0)
        elif isinstance(layer, MaxPool):
            arg, in_shape = c
            g = K.maxpool_backward_nhwc(g, arg, in_shape, (layer.kernel_h, layer.kernel_w), (layer.stride_h, layer.stride_w))
        elif isinstance(layer, Conv2d):
            cols, in_shape = c
            need_x = _has_params_before(layers, i)
            if layer.bias:
                grads[f"{i}.bias"] = g.sum(axis=(0, 1, 2))
            gx, gw = K.conv2d_backward_nhwc(cols, in_shape, model.params[f"{i}.weight"], g,
                                            (layer.pad_h, layer.pad_w), (layer.stride_h, layer.stride_w),
                                            need_grad_x=need_x)
            grads[f"{i}.weight"] = gw
            g = gx
        if i in scale:
            f = scale[i]
            for key in (f"{i}.weight", f"{i}.bias"):
                if key in grads:
                    grads[key] = grads[key] * f
            if g is not None:
                g = g * f
        if g is None:
            break
    ordered = {name: grads[name].astype(model.dtype, copy=False) for name in model.params}
    return loss, ordered, (probs[0] if single else probs)


def _has_params_before(layers, i):
    return any(isinstance(l, (Conv2d, FullyConnected)) for l in layers[:i])

