import numpy as np

from ecgfusion import nn


def constant_model(level, probs):
    """A bias-only network whose output is ``probs`` for every input."""
    probs = np.asarray(probs, dtype=float)
    spec = nn.h_level(level, len(probs), bias=True)
    m = nn.zero_model(spec)
    params = dict(m.params)
    last = [k for k in params if k.endswith(".bias")][-1]
    params[last] = np.log(probs).astype(np.float32)
    return m.with_params(params)
