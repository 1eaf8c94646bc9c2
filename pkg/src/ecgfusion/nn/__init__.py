from .kernels import (
    conv2d_backward,
    conv2d_forward,
    fc_backward,
    fc_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax,
)
from .layers import (
    Conv2d,
    FullyConnected,
    MaxPool,
    NetworkSpec,
    Relu,
    count_flops,
    count_params,
    infer_shapes,
    param_shapes,
)
from .network import Model, Trace, forward, init_model, loss_and_grads, predict, zero_model
from .presets import baseline_1d, build_preset, deep_variant, h_level
from .serialize import load_model, model_from_bytes, model_to_bytes, save_model

__all__ = [
    "Conv2d", "FullyConnected", "MaxPool", "NetworkSpec", "Relu", "Model", "Trace",
    "conv2d_forward", "conv2d_backward", "maxpool_forward", "maxpool_backward",
    "relu_forward", "relu_backward", "fc_forward", "fc_backward", "softmax",
    "infer_shapes", "param_shapes", "count_params", "count_flops",
    "init_model", "zero_model", "forward", "predict", "loss_and_grads",
    "h_level", "baseline_1d", "deep_variant", "build_preset",
    "save_model", "load_model", "model_to_bytes", "model_from_bytes",
]
