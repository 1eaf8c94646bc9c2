"""Augmentation, multi-level segmentation, length fitting and fold splits."""
from __future__ import annotations

import numpy as np

from ..errors import NotPowerOfTwoLength
from .records import Dataset, EcgRecord

BASE_LEN = 512
MAX_LEVEL = 6
TARGET_LEN = BASE_LEN * 2 ** (MAX_LEVEL - 1)


def rotate(record: EcgRecord, k: int) -> EcgRecord:
    """Circularly shift so the output starts at sample ``k``."""
    k = int(k) % len(record)
    return record.with_samples(np.concatenate([record.samples[k:], record.samples[:k]]))


def augment_shift(record: EcgRecord, seed=None) -> EcgRecord:
    """Split at a uniformly drawn position and swap the two pieces."""
    k = int(np.random.default_rng(seed).integers(0, len(record)))
    return rotate(record, k)


def max_level(length: int, base_len: int = BASE_LEN) -> int:
    """``s_l`` for a record of ``length`` samples, i.e. ``log2(length/base)+1``."""
    ratio, rem = divmod(length, base_len)
    if rem or ratio < 1 or ratio & (ratio - 1) or ratio.bit_length() > MAX_LEVEL:
        raise NotPowerOfTwoLength(
            f"length {length} is not {base_len} * 2**j for j in 0..{MAX_LEVEL - 1}")
    return ratio.bit_length()


def segments_per_level(s_l: int) -> list:
    """``k_s = 2**(s_l - s)`` for ``s = 1..s_l``."""
    return [2 ** (s_l - s) for s in range(1, s_l + 1)]


def segment_samples(samples, level: int, base_len: int = BASE_LEN) -> np.ndarray:
    """Non-overlapping level-``level`` pieces as rows of a ``(k, seg_len)`` array."""
    samples = np.asarray(samples)
    seg = base_len * 2 ** (level - 1)
    if samples.shape[-1] % seg:
        raise NotPowerOfTwoLength(f"length {samples.shape[-1]} is not a multiple of {seg}")
    return samples.reshape(samples.shape[:-1] + (samples.shape[-1] // seg, seg))


def segment(record: EcgRecord, base_len: int = BASE_LEN) -> list:
    """Per-level segment lists; entry ``s-1`` holds the ``k_s`` level-``s`` pieces."""
    s_l = max_level(len(record), base_len)
    return [[record.with_samples(row) for row in segment_samples(record.samples, s, base_len)]
            for s in range(1, s_l + 1)]


def fit_length(record: EcgRecord, target_len: int = TARGET_LEN) -> EcgRecord:
    """Head-crop long records; tile short ones and crop to ``target_len``."""
    if target_len < 1:
        raise ValueError("target_len must be positive")
    return record.with_samples(np.resize(record.samples, target_len))


def split_folds(dataset, k: int = 3, seed=0) -> list:
    """Stratified ``k``-way split of record indices.

    Each class is shuffled and dealt round-robin; the starting fold rotates
    from class to class so overall fold sizes stay balanced too.
    """
    labels = dataset.labels if isinstance(dataset, Dataset) else np.asarray(dataset)
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    start = 0
    for lab in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == lab))
        for j, i in enumerate(idx):
            folds[(start + j) % k].append(int(i))
        start = (start + len(idx)) % k
    return [np.array(sorted(f), dtype=np.int64) for f in folds]

