"""Forward and backward kernels for the fixed layer set.

The public functions take channel-first tensors, either a single sample
``(C, H, W)`` or a batch ``(N, C, H, W)``.  The ``*_nhwc`` helpers are the
channel-last batch versions used by the network code; im2col is much
cheaper to build when channels are the innermost axis.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


def _pair(v) -> tuple:
    if np.isscalar(v):
        return (int(v), int(v))
    a, b = v
    return (int(a), int(b))


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeMismatch(f"expected (C, H, W) or (N, C, H, W), got shape {x.shape}")


def _to_nhwc(x):
    return np.ascontiguousarray(x.transpose(0, 2, 3, 1))


def _to_nchw(x):
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


# --------------------------------------------------------------------------
# convolution

def conv_out_size(h, w, kh, kw, pad, stride):
    ph, pw = pad
    sh, sw = stride
    span_h, span_w = h + 2 * ph - kh, w + 2 * pw - kw
    if span_h < 0 or span_w < 0:
        raise ShapeMismatch(f"kernel {kh}x{kw} exceeds padded input {h}x{w}")
    return span_h // sh + 1, span_w // sw + 1


def conv2d_forward_nhwc(x, w, pad, stride):
    """Return ``(y, cols)``; ``cols`` is the im2col matrix kept for backward."""
    n, h, wd, c = x.shape
    o, cw, kh, kw = w.shape
    if c != cw:
        raise ShapeMismatch(f"input has {c} channels, weights expect {cw}")
    ph, pw = pad
    sh, sw = stride
    ho, wo = conv_out_size(h, wd, kh, kw, pad, stride)
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if (ph or pw) else x
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, : (ho - 1) * sh + 1 : sh, : (wo - 1) * sw + 1 : sw]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)
    wm = w.transpose(2, 3, 1, 0).reshape(kh * kw * c, o)
    y = (cols @ wm).reshape(n, ho, wo, o)
    return y, cols


def conv2d_backward_nhwc(cols, x_shape, w, grad_out, pad, stride, need_grad_x=True):
    n, h, wd, c = x_shape
    o, _, kh, kw = w.shape
    _, ho, wo, _ = grad_out.shape
    ph, pw = pad
    sh, sw = stride
    g2 = grad_out.reshape(n * ho * wo, o)
    grad_w = (cols.T @ g2).reshape(kh, kw, c, o).transpose(3, 2, 0, 1)
    grad_w = np.ascontiguousarray(grad_w)
    if not need_grad_x:
        return None, grad_w
    wm = w.transpose(2, 3, 1, 0).reshape(kh * kw * c, o)
    gcols = (g2 @ wm.T).reshape(n, ho, wo, kh, kw, c)
    gxp = np.zeros((n, h + 2 * ph, wd + 2 * pw, c), dtype=grad_out.dtype)
    for u in range(kh):
        for v in range(kw):
            gxp[:, u : u + (ho - 1) * sh + 1 : sh, v : v + (wo - 1) * sw + 1 : sw, :] += gcols[:, :, :, u, v, :]
    return gxp[:, ph : ph + h, pw : pw + wd, :], grad_w


def conv2d_forward(x, weights, pad=0, stride=1):
    """Bias-free 2-D cross-correlation with zero padding."""
    xb, single = _batched(x)
    weights = np.asarray(weights)
    if weights.ndim != 4:
        raise ShapeMismatch(f"weights must be (outC, inC, kh, kw), got {weights.shape}")
    y, _ = conv2d_forward_nhwc(_to_nhwc(xb), weights, _pair(pad), _pair(stride))
    y = _to_nchw(y)
    return y[0] if single else y


def conv2d_backward(x, weights, grad_out, pad=0, stride=1):
    """Return ``(grad_x, grad_w)`` for :func:`conv2d_forward`."""
    xb, single = _batched(x)
    gb, _ = _batched(grad_out)
    weights = np.asarray(weights)
    pad, stride = _pair(pad), _pair(stride)
    xh = _to_nhwc(xb)
    y, cols = conv2d_forward_nhwc(xh, weights, pad, stride)
    gh = _to_nhwc(gb)
    if gh.shape != y.shape:
        raise ShapeMismatch(f"grad_out shape {gb.shape} does not match output {_to_nchw(y).shape}")
    gx, gw = conv2d_backward_nhwc(cols, xh.shape, weights, gh, pad, stride)
    gx = _to_nchw(gx)
    return (gx[0] if single else gx), gw


# --------------------------------------------------------------------------
# max pooling

def maxpool_forward_nhwc(x, kernel, stride):
    """Return ``(y, arg)`` where ``arg`` is the winning index inside each window.

    Window positions are numbered row-major, so the first maximum in that
    order is also the one with the lowest flat input index.
    """
    n, h, w, c = x.shape
    kh, kw = kernel
    sh, sw = stride
    if h < kh or w < kw or (h - kh) % sh or (w - kw) % sw:
        raise ShapeMismatch(f"pool {kh}x{kw}/({sh},{sw}) does not tile input {h}x{w} exactly")
    ho, wo = (h - kh) // sh + 1, (w - kw) // sw + 1
    if (kh, kw) == (sh, sw):
        win = x.reshape(n, ho, kh, wo, kw, c).transpose(0, 1, 3, 5, 2, 4)
    else:
        win = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    win = win.reshape(n, ho, wo, c, kh * kw)
    arg = win.argmax(axis=-1)
    y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return y, arg


def maxpool_backward_nhwc(grad_out, arg, x_shape, kernel, stride):
    n, h, w, c = x_shape
    kh, kw = kernel
    sh, sw = stride
    _, ho, wo, _ = grad_out.shape
    if (kh, kw) == (sh, sw):
        gwin = np.zeros((n, ho, wo, c, kh * kw), dtype=grad_out.dtype)
        np.put_along_axis(gwin, arg[..., None], grad_out[..., None], axis=-1)
        return gwin.reshape(n, ho, wo, c, kh, kw).transpose(0, 1, 4, 2, 5, 3).reshape(x_shape)
    gx = np.zeros(x_shape, dtype=grad_out.dtype)
    rows = np.arange(ho)[:, None] * sh + arg.transpose(0, 3, 1, 2) // kw
    cols = np.arange(wo)[None, :] * sw + arg.transpose(0, 3, 1, 2) % kw
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    np.add.at(gx, (ni, rows, cols, ci), grad_out.transpose(0, 3, 1, 2))
    return gx


def maxpool_forward(x, kernel, stride):
    """Max pooling with exact tiling.

    Returns ``(y, argmax)`` where ``argmax`` holds, per output cell, the flat
    ``h * W + w`` index of the winning input within its channel plane.
    """
    xb, single = _batched(x)
    kernel, stride = _pair(kernel), _pair(stride)
    y, arg = maxpool_forward_nhwc(_to_nhwc(xb), kernel, stride)
    ho, wo = y.shape[1:3]
    w = xb.shape[3]
    rows = np.arange(ho)[:, None, None] * stride[0] + arg // kernel[1]
    cols = np.arange(wo)[None, :, None] * stride[1] + arg % kernel[1]
    flat = _to_nchw(rows * w + cols)
    y = _to_nchw(y)
    return (y[0], flat[0]) if single else (y, flat)


def maxpool_backward(grad_out, argmax, input_shape):
    """Route each output gradient to its argmax input position."""
    gb, single = _batched(grad_out)
    ab, _ = _batched(argmax)
    shape = tuple(input_shape)
    full = (1,) + shape if len(shape) == 3 else shape
    n, c, h, w = full
    gx = np.zeros((n, c, h * w), dtype=gb.dtype)
    np.add.at(gx, (np.arange(n)[:, None, None, None], np.arange(c)[None, :, None, None], ab), gb)
    gx = gx.reshape(full)
    return gx[0] if single else gx


# --------------------------------------------------------------------------
# elementwise, dense, softmax

def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    # subgradient at exactly zero is 0
    return grad_out * (x > 0)


def fc_forward(x, weights):
    """``weights`` is ``(out, in)``; ``x`` is a vector or a batch of vectors."""
    x = np.asarray(x)
    weights = np.asarray(weights)
    if x.shape[-1] != weights.shape[1]:
        raise ShapeMismatch(f"input has {x.shape[-1]} features, weights expect {weights.shape[1]}")
    return x @ weights.T


def fc_backward(x, weights, grad_out):
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    grad_x = grad_out @ weights
    if x.ndim == 1:
        grad_w = np.outer(grad_out, x)
    else:
        grad_w = grad_out.T @ x
    return grad_x, grad_w


def softmax(logits):
    z = np.asarray(logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
