"""Glue for training and scoring scale banks on segmented datasets."""
from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from . import dsp, metrics, optim
from .data import Dataset, rotate, segment_samples
from .errors import EmptyDataset, LengthMismatch
from .fusion import FusionScheme, ScaleBank, bank_segment_probs, fuse_chunks
from .nn import Model, NetworkSpec, build_preset, predict

log = logging.getLogger(__name__)


def spec_for(preset: str, level: int, num_classes: int) -> NetworkSpec:
    """Network for ``level`` from a preset name such as ``h_level`` or ``deep_variant``."""
    if preset == "baseline_1d":
        if level != 1:
            raise ValueError("baseline_1d reads 512 raw samples, so it only exists at level 1")
        return build_preset(preset, num_classes=num_classes)
    return build_preset(preset, level=level, num_classes=num_classes)


def level_of(spec: NetworkSpec) -> int:
    width = spec.input_dims[-1]
    if spec.input_dims[1] == 1:
        return 1
    return int(np.log2(width // 4)) + 1


def model_inputs(spec: NetworkSpec, segments, level: int) -> np.ndarray:
    """Raw ``(n, seg_len)`` segments to the input layout ``spec`` expects."""
    segments = np.asarray(segments)
    if spec.input_dims[1] == 1:  # raw waveform network
        if segments.shape[-1] != spec.input_dims[-1]:
            raise LengthMismatch(f"{spec.descriptor} reads {spec.input_dims[-1]} samples")
        return segments.reshape(len(segments), 1, 1, -1).astype(np.float32)
    return dsp.preprocess_batch(segments, level)


def segment_dataset(dataset: Dataset, level: int, augment_copies: int = 0, seed=0):
    """Stack level-``level`` segments of every record, with repeated labels.

    Each record can also contribute ``augment_copies`` randomly rotated
    versions of itself.
    """
    if not dataset.records:
        raise EmptyDataset("dataset has no records")
    rng = np.random.default_rng(seed)
    segs, labels = [], []
    for rec in dataset.records:
        versions = [rec] + [rotate(rec, int(rng.integers(0, len(rec)))) for _ in range(augment_copies)]
        for v in versions:
            pieces = segment_samples(v.samples, level)
            segs.append(pieces)
            labels.append(np.full(len(pieces), -1 if v.label is None else v.label, dtype=np.int64))
    return np.concatenate(segs), np.concatenate(labels)


def train_level(dataset: Dataset, level: int, cfg: optim.TrainConfig, preset: str = "h_level",
                augment_copies: int = 0):
    """Train one scale-specific model on every level-``level`` segment of ``dataset``."""
    spec = spec_for(preset, level, dataset.num_classes)
    segs, labels = segment_dataset(dataset, level, augment_copies, seed=cfg.seed)
    if np.any(labels < 0):
        raise EmptyDataset("training needs every record to be labelled")
    x = model_inputs(spec, segs, level)
    log.info("level %d: %d training segments", level, len(x))
    return optim.train(spec, (x, labels), level, cfg)


def level_seed(seed: int, level: int) -> int:
    return int(np.random.SeedSequence([seed, level]).generate_state(1)[0])


def train_bank(dataset: Dataset, levels, cfgs, preset: str = "h_level", augment_copies=0):
    """Train ``h_s`` for each level; ``cfgs`` maps level to :class:`TrainConfig`."""
    models, histories = [], []
    for s in levels:
        cfg = cfgs[s] if isinstance(cfgs, dict) else replace(cfgs, seed=level_seed(cfgs.seed, s))
        copies = augment_copies[s] if isinstance(augment_copies, dict) else augment_copies
        m, h = train_level(dataset, s, cfg, preset, copies)
        models.append(m)
        histories.append(h)
    return models, histories


def segment_predictions(model: Model, dataset: Dataset, level: int | None = None):
    """``(preds, labels)`` for every level-``level`` segment of every record."""
    level = level_of(model.spec) if level is None else level
    segs, labels = segment_dataset(dataset, level)
    probs = predict(model, model_inputs(model.spec, segs, level))
    return probs.argmax(axis=1), labels


def score_model(model: Model, dataset: Dataset, level: int | None = None, class_names=()):
    preds, labels = segment_predictions(model, dataset, level)
    return metrics.confusion(preds, labels, model.spec.num_classes, class_names)


def fused_predictions(bank: ScaleBank, dataset: Dataset, max_level: int, scheme=FusionScheme.UNIFORM):
    """Predictions per level ``L = 1..max_level`` on consecutive level-``L`` chunks.

    Each record is cut into chunks of ``512 * 2**(L-1)`` samples and every
    chunk gets its own fused decision from models ``1..L``.  Returns a dict
    level -> ``(preds, labels)``.
    """
    samples = np.stack([r.samples for r in dataset.records]).astype(np.float64)
    labels = dataset.labels
    chunk = 512 * 2 ** (max_level - 1)
    if samples.shape[1] % chunk:
        raise LengthMismatch(f"record length {samples.shape[1]} is not a multiple of {chunk}")
    # treat each top-level chunk as its own record, then map back
    n, length = samples.shape
    per = length // chunk
    flat = samples.reshape(n * per, chunk)
    seg = bank_segment_probs(bank, flat, levels=range(1, max_level + 1))
    out = {}
    for L in range(1, max_level + 1):
        fused = fuse_chunks(seg, L, scheme)  # (n*per, chunks_in_top, C)
        preds = fused.argmax(axis=2).reshape(n, -1)
        out[L] = (preds.ravel(), np.repeat(labels, preds.shape[1]))
    return out


__all__ = [
    "spec_for", "level_of", "model_inputs", "segment_dataset", "train_level", "train_bank",
    "level_seed", "segment_predictions", "score_model", "fused_predictions",
]
