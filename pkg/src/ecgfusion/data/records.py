from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BadLabel

CANONICAL_RATE = 512


@dataclass
class EcgRecord:
    """A single-lead waveform in millivolts.  Samples are stored as float32."""

    samples: np.ndarray
    sample_rate_hz: int = CANONICAL_RATE
    label: int | None = None

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError(f"record needs a non-empty 1-D sample vector, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("record contains non-finite samples")
        if self.sample_rate_hz < 1:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, EcgRecord):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz and self.label == other.label
                and np.array_equal(self.samples, other.samples))

    def with_samples(self, samples) -> "EcgRecord":
        return EcgRecord(samples, self.sample_rate_hz, self.label)


@dataclass
class Dataset:
    records: list
    sample_rate: int = CANONICAL_RATE
    num_classes: int = 20
    class_names: list | None = field(default=None, compare=False)

    def __post_init__(self):
        for i, r in enumerate(self.records):
            if r.sample_rate_hz != self.sample_rate:
                raise ValueError(f"record {i} sampled at {r.sample_rate_hz} Hz, dataset at {self.sample_rate} Hz")
            if r.label is not None and not 0 <= r.label < self.num_classes:
                raise BadLabel(i, f"record {i} has label {r.label}, class count is {self.num_classes}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([-1 if r.label is None else r.label for r in self.records], dtype=np.int64)

    def subset(self, indices) -> "Dataset":
        return Dataset([self.records[i] for i in indices], self.sample_rate, self.num_classes, self.class_names)

    def class_counts(self) -> dict:
        counts = {}
        for r in self.records:
            counts[r.label] = counts.get(r.label, 0) + 1
        return dict(sorted(counts.items(), key=lambda kv: (kv[0] is None, kv[0] or 0)))
