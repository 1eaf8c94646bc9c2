"""Architecture presets and their canonical descriptor strings.

Descriptor grammar: ``<preset>[:<level>][;key=value...]`` with override keys
sorted and defaults omitted, e.g. ``h_level:3;num_classes=4``.
"""
from __future__ import annotations

from ..errors import InvalidLevel
from .layers import Conv2d, FullyConnected, MaxPool, NetworkSpec, Relu

MAX_LEVEL = 6
BAND_BINS = 32
BASE_FRAMES = 4


def _check_level(level) -> int:
    if isinstance(level, bool) or not isinstance(level, int) or not 1 <= level <= MAX_LEVEL:
        raise InvalidLevel(f"level must be an integer in 1..{MAX_LEVEL}, got {level!r}")
    return level


def _conv3x3(bias):
    return Conv2d(32, 3, 3, pad_h=1, pad_w=1, bias=bias)


def _descriptor(preset, level, overrides, defaults):
    head = preset if level is None else f"{preset}:{level}"
    extra = [f"{k}={int(v) if isinstance(v, bool) else v}"
             for k, v in sorted(overrides.items()) if defaults.get(k) != v]
    return ";".join([head] + extra)


def h_level(level: int, num_classes: int = 20, bias: bool = False) -> NetworkSpec:
    """Scale-specific network for inputs of ``4 * 2**(level-1)`` frames.

    Only the first pool's time stride grows with the level, so the first
    fully-connected layer always sees a 32 x 2 x 2 map.
    """
    _check_level(level)
    a = 2 ** (level - 1)
    layers = [
        _conv3x3(bias),
        MaxPool(4, a, 4, a),
        Relu(),
        _conv3x3(bias),
        MaxPool(4, 2, 4, 2),
        Relu(),
        FullyConnected(64, bias=bias),
        FullyConnected(num_classes, bias=bias),
    ]
    desc = _descriptor("h_level", level, {"num_classes": num_classes, "bias": bias},
                       {"num_classes": 20, "bias": False})
    return NetworkSpec((1, BAND_BINS, BASE_FRAMES * a), layers, num_classes, descriptor=desc)


def baseline_1d(num_classes: int = 20, bias: bool = False) -> NetworkSpec:
    """The 1-D raw-waveform comparison network, laid out as height-1 2-D layers."""
    layers = [
        Conv2d(32, 1, 15, pad_h=0, pad_w=7, stride_h=1, stride_w=6, bias=bias),
        Relu(),
        Conv2d(16, 1, 15, pad_h=0, pad_w=7, stride_h=1, stride_w=6, bias=bias),
        Relu(),
        Conv2d(16, 1, 15, pad_h=0, pad_w=7, stride_h=1, stride_w=6, bias=bias),
        Relu(),
        MaxPool(1, 3, 1, 1),
        FullyConnected(10, bias=bias),
        FullyConnected(num_classes, bias=bias),
    ]
    desc = _descriptor("baseline_1d", None, {"num_classes": num_classes, "bias": bias},
                       {"num_classes": 20, "bias": False})
    return NetworkSpec((1, 1, 512), layers, num_classes, descriptor=desc)


def deep_variant(num_classes: int = 4, level: int = MAX_LEVEL, bias: bool = False) -> NetworkSpec:
    """``h_level`` with an extra identical 3x3 convolution after each of the two convs."""
    _check_level(level)
    a = 2 ** (level - 1)
    layers = [
        _conv3x3(bias),
        Relu(),
        _conv3x3(bias),
        MaxPool(4, a, 4, a),
        Relu(),
        _conv3x3(bias),
        Relu(),
        _conv3x3(bias),
        MaxPool(4, 2, 4, 2),
        Relu(),
        FullyConnected(64, bias=bias),
        FullyConnected(num_classes, bias=bias),
    ]
    desc = _descriptor("deep_variant", None, {"num_classes": num_classes, "level": level, "bias": bias},
                       {"num_classes": 4, "level": MAX_LEVEL, "bias": False})
    return NetworkSpec((1, BAND_BINS, BASE_FRAMES * a), layers, num_classes, descriptor=desc)


_BUILDERS = {"h_level": h_level, "baseline_1d": baseline_1d, "deep_variant": deep_variant}


def build_preset(name: str, **overrides) -> NetworkSpec:
    """Build a preset from its name or full descriptor string.

    ``build_preset("h_level:2")``, ``build_preset("h_level", level=2)`` and
    ``build_preset("deep_variant;num_classes=4")`` are all accepted.
    """
    head, *pairs = name.strip().split(";")
    kwargs = {}
    preset, _, level = head.partition(":")
    if level:
        try:
            kwargs["level"] = int(level)
        except ValueError:
            raise InvalidLevel(f"bad level in descriptor {name!r}") from None
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ValueError(f"malformed override {pair!r} in {name!r}")
        kwargs[key] = bool(int(value)) if key == "bias" else int(value)
    kwargs.update(overrides)
    try:
        builder = _BUILDERS[preset]
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(_BUILDERS)}") from None
    if preset == "h_level" and "level" not in kwargs:
        raise InvalidLevel("h_level needs a level, e.g. 'h_level:1'")
    try:
        return builder(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad overrides for {preset}: {exc}") from None
