"""ECGD dataset files and CSV import.

ECGD layout, all integers unsigned 32-bit little-endian::

    b"ECGD" version sample_rate class_count record_count
    per record: label length samples (float32 LE)

An unlabelled record stores label ``0xFFFFFFFF``.
"""
from __future__ import annotations

import csv
import io
import os
import struct

import numpy as np

from ..errors import BadLabel, BadMagic, RaggedCsvRow, TruncatedFile, VersionUnsupported
from .records import Dataset, EcgRecord

MAGIC = b"ECGD"
VERSION = 1
NO_LABEL = 0xFFFFFFFF
_HEADER = struct.Struct("<4sIIII")
_REC = struct.Struct("<II")


def dataset_to_bytes(ds: Dataset) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, ds.sample_rate, ds.num_classes, len(ds.records)))
    for r in ds.records:
        buf.write(_REC.pack(NO_LABEL if r.label is None else r.label, len(r)))
        buf.write(r.samples.astype("<f4").tobytes())
    return buf.getvalue()


def dataset_from_bytes(data: bytes) -> Dataset:
    if data[:4] != MAGIC:
        raise BadMagic(f"not an ECGD dataset file (magic {data[:4]!r})")
    if len(data) < _HEADER.size:
        raise TruncatedFile("file ends inside the ECGD header")
    _, version, rate, classes, count = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionUnsupported(f"ECGD version {version} is not supported (expected {VERSION})")
    pos = _HEADER.size
    records = []
    for i in range(count):
        if pos + _REC.size > len(data):
            raise TruncatedFile(f"file ends inside record {i} header")
        label, length = _REC.unpack_from(data, pos)
        pos += _REC.size
        end = pos + 4 * length
        if end > len(data):
            raise TruncatedFile(f"file ends inside record {i} samples")
        samples = np.frombuffer(data[pos:end], dtype="<f4").astype(np.float32)
        pos = end
        records.append(EcgRecord(samples, rate, None if label == NO_LABEL else label))
    if pos != len(data):
        raise TruncatedFile(f"{len(data) - pos} unexpected bytes after the last record")
    return Dataset(records, rate, classes)


def write_dataset(path, ds: Dataset) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(dataset_to_bytes(ds))


def read_dataset(path) -> Dataset:
    with open(os.fspath(path), "rb") as fh:
        return dataset_from_bytes(fh.read())


def import_csv(path, rate: int = 512) -> Dataset:
    """Read ``label,v0,v1,...`` rows; every row must have the same length."""
    records = []
    width = None
    with open(os.fspath(path), newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise RaggedCsvRow(line_no, f"line {line_no} has {len(row)} fields, expected {width}")
            try:
                label = int(row[0])
            except ValueError:
                raise BadLabel(line_no, f"line {line_no}: label {row[0]!r} is not an integer") from None
            if label < 0:
                raise BadLabel(line_no, f"line {line_no}: negative label {label}")
            if len(row) < 2:
                raise RaggedCsvRow(line_no, f"line {line_no} has no samples")
            try:
                values = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise RaggedCsvRow(line_no, f"line {line_no}: {exc}") from None
            records.append(EcgRecord(values, rate, label))
    classes = max((r.label for r in records), default=-1) + 1
    return Dataset(records, rate, max(classes, 1))
