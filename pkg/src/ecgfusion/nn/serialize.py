"""ECGM model files.

Layout (all integers unsigned 32-bit little-endian)::

    b"ECGM"  version  len(descriptor)  descriptor (UTF-8)
    then for each parameter tensor in layer order:
        rank  dim_0 ... dim_{rank-1}  float32 LE data (row-major)
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

from ..errors import BadMagic, FormatError, TruncatedFile, VersionUnsupported
from .layers import param_shapes
from .network import Model
from .presets import build_preset

MAGIC = b"ECGM"
VERSION = 1
_U32 = struct.Struct("<I")


def model_to_bytes(model: Model) -> bytes:
    desc = model.spec.descriptor
    if desc is None:
        raise ValueError("only preset-built models can be serialized (spec has no descriptor)")
    raw = desc.encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_U32.pack(VERSION))
    buf.write(_U32.pack(len(raw)))
    buf.write(raw)
    for arr in model.params.values():
        buf.write(_U32.pack(arr.ndim))
        for d in arr.shape:
            buf.write(_U32.pack(d))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"file ends while reading {what} (offset {self.pos}, need {n} bytes)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def model_from_bytes(data: bytes) -> Model:
    r = _Reader(data)
    magic = r.take(4, "magic") if len(data) >= 4 else None
    if magic != MAGIC:
        raise BadMagic(f"not an ECGM model file (magic {data[:4]!r})")
    version = r.u32("version")
    if version != VERSION:
        raise VersionUnsupported(f"ECGM version {version} is not supported (expected {VERSION})")
    desc = r.take(r.u32("descriptor length"), "descriptor").decode("utf-8")
    try:
        spec = build_preset(desc)
    except ValueError as exc:
        raise FormatError(f"bad architecture descriptor {desc!r}: {exc}") from exc
    params = {}
    for name, shape in param_shapes(spec):
        rank = r.u32(f"{name} rank")
        dims = tuple(r.u32(f"{name} dims") for _ in range(rank))
        if dims != tuple(shape):
            raise FormatError(f"{name}: stored shape {dims}, architecture implies {tuple(shape)}")
        count = int(np.prod(dims))
        params[name] = np.frombuffer(r.take(4 * count, f"{name} data"), dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after the last tensor")
    return Model(spec, params)


def save_model(model: Model, path) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> Model:
    with open(os.fspath(path), "rb") as fh:
        return model_from_bytes(fh.read())
