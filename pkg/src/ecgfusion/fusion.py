"""Progressive decision fusion over a bank of scale-specific models.

A record of ``512 * 2**(s_l-1)`` samples is cut at every level ``s`` into
``k_s = 2**(s_l-s)`` pieces.  Model ``h_s`` scores each piece and the fused
output is ``sum_s w_s * mean_k p_sk``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import dsp
from .data.ops import max_level, segment_samples
from .errors import InvalidLevel, LengthMismatch, NotOnSimplex, SegmentCountMismatch, ShapeMismatch
from .nn import Model, predict

MAX_LEVEL = 6
BASE_LEN = 512
SIMPLEX_TOL = 1e-5


class FusionScheme(str, Enum):
    UNIFORM = "uniform"
    GEOMETRIC = "geometric"


def _check_level(s_l) -> int:
    if isinstance(s_l, bool) or not isinstance(s_l, (int, np.integer)) or not 1 <= s_l <= MAX_LEVEL:
        raise InvalidLevel(f"s_l must be an integer in 1..{MAX_LEVEL}, got {s_l!r}")
    return int(s_l)


@dataclass(frozen=True)
class FusionWeights:
    scheme: FusionScheme
    s_l: int
    w: tuple

    def __post_init__(self):
        if len(self.w) != self.s_l:
            raise ShapeMismatch(f"{len(self.w)} weights for s_l={self.s_l}")
        if min(self.w) <= 0 or abs(sum(self.w) - 1.0) > 1e-12:
            raise NotOnSimplex(f"fusion weights {self.w} are not a positive unit-sum vector")

    def as_array(self) -> np.ndarray:
        return np.array(self.w)


def fusion_weights(s_l: int, scheme=FusionScheme.UNIFORM) -> FusionWeights:
    """Uniform ``1/s_l`` or geometric ``2**(s-1) / (2**s_l - 1)`` weights."""
    s_l = _check_level(s_l)
    scheme = FusionScheme(scheme)
    if scheme is FusionScheme.UNIFORM:
        w = [1.0 / s_l] * s_l
    else:
        w = [2.0 ** (s - 1) / (2.0 ** s_l - 1) for s in range(1, s_l + 1)]
    return FusionWeights(scheme, s_l, tuple(w))


def _check_simplex(p, where):
    if p.ndim != 1 or np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise NotOnSimplex(f"{where} is not a probability vector")


def fuse(per_scale_probs, w: FusionWeights) -> np.ndarray:
    """Weighted mean of per-level segment averages; a point on the simplex.

    ``per_scale_probs[s-1]`` holds the ``2**(s_l-s)`` vectors of level ``s``.
    """
    if len(per_scale_probs) != w.s_l:
        raise SegmentCountMismatch(f"got {len(per_scale_probs)} levels, weights are for s_l={w.s_l}")
    out = None
    for s, (ws, vecs) in enumerate(zip(w.w, per_scale_probs), start=1):
        arr = np.asarray(vecs, dtype=np.float64)
        k = 2 ** (w.s_l - s)
        if arr.ndim != 2 or arr.shape[0] != k:
            raise SegmentCountMismatch(f"level {s} needs {k} vectors, got {arr.shape[0] if arr.ndim else 0}")
        for j, p in enumerate(arr):
            _check_simplex(p, f"level {s} segment {j}")
        term = ws * arr.mean(axis=0)
        if out is None:
            out = term
        elif term.shape != out.shape:
            raise ShapeMismatch(f"level {s} vectors have {term.size} classes, expected {out.size}")
        else:
            out = out + term
    return out


def decide(p) -> int:
    """Argmax, ties going to the lowest class index."""
    return int(np.argmax(p))


@dataclass(frozen=True)
class ScaleBank:
    """Models ``h_1..h_{s_max}``; ``models[s-1]`` reads level-``s`` spectrograms."""

    models: tuple
    base_len: int = BASE_LEN

    def __post_init__(self):
        models = tuple(self.models)
        object.__setattr__(self, "models", models)
        if not 1 <= len(models) <= MAX_LEVEL:
            raise InvalidLevel(f"a bank holds 1..{MAX_LEVEL} models, got {len(models)}")
        classes = {m.spec.num_classes for m in models}
        if len(classes) != 1:
            raise ShapeMismatch(f"bank models disagree on class count: {sorted(classes)}")
        for s, m in enumerate(models, start=1):
            width = m.spec.input_dims[-1]
            if width != 4 * 2 ** (s - 1):
                raise ShapeMismatch(f"model {s} reads {width} frames, expected {4 * 2 ** (s - 1)}")

    @property
    def s_max(self) -> int:
        return len(self.models)

    @property
    def num_classes(self) -> int:
        return self.models[0].spec.num_classes


def bank_segment_probs(bank: ScaleBank, samples, levels=None, cfg: dsp.StftConfig = dsp.StftConfig(),
                       batch_size: int = 256) -> list:
    """Score every segment of every record at each level.

    ``samples`` is ``(n, length)``.  Entry ``s-1`` of the result has shape
    ``(n, length // seg_len_s, C)``.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[None]
    top = max_level(x.shape[-1], bank.base_len)
    levels = range(1, min(top, bank.s_max) + 1) if levels is None else levels
    out = []
    for s in levels:
        if s > bank.s_max:
            raise InvalidLevel(f"bank has no model for level {s}")
        segs = segment_samples(x, s, bank.base_len)
        n, k, seg = segs.shape
        inputs = dsp.preprocess_batch(segs.reshape(n * k, seg), s, cfg, dtype=bank.models[s - 1].dtype)
        out.append(predict(bank.models[s - 1], inputs, batch_size).astype(np.float64).reshape(n, k, -1))
    return out


def fuse_chunks(seg_probs: list, level: int, scheme=FusionScheme.UNIFORM) -> np.ndarray:
    """Fused probabilities for consecutive level-``level`` chunks of each record.

    ``seg_probs`` is the output of :func:`bank_segment_probs`.  Each chunk of
    ``512 * 2**(level-1)`` samples is fused on its own with ``s_l = level``,
    giving an array ``(n, chunks, C)``.
    """
    w = fusion_weights(level, scheme)
    if len(seg_probs) < level:
        raise SegmentCountMismatch(f"need segment scores for levels 1..{level}, got {len(seg_probs)}")
    n, chunks, C = seg_probs[level - 1].shape
    out = np.zeros((n, chunks, C))
    for s in range(1, level + 1):
        p = seg_probs[s - 1]
        out += w.w[s - 1] * p.reshape(n, chunks, 2 ** (level - s), C).mean(axis=2)
    return out


@dataclass(frozen=True)
class ProgressiveStep:
    level: int
    probs: np.ndarray
    decision: int


def predict_progressive(bank: ScaleBank, record, scheme=FusionScheme.UNIFORM,
                        cfg: dsp.StftConfig = dsp.StftConfig()) -> list:
    """Fused decisions on growing prefixes of one record, one per level.

    Step ``L`` uses the first ``512 * 2**(L-1)`` samples and models ``1..L``.
    Level-``s`` segments of a prefix are the leading segments of the whole
    record, so every segment is scored once.
    """
    samples = np.asarray(getattr(record, "samples", record))
    s_l = max_level(samples.shape[-1], bank.base_len)
    if s_l > bank.s_max:
        raise LengthMismatch(f"record needs models up to level {s_l}, bank stops at {bank.s_max}")
    seg = [p[0] for p in bank_segment_probs(bank, samples, cfg=cfg)]
    steps = []
    for L in range(1, s_l + 1):
        w = fusion_weights(L, scheme)
        probs = fuse([seg[s - 1][: 2 ** (L - s)] for s in range(1, L + 1)], w)
        steps.append(ProgressiveStep(L, probs, decide(probs)))
    return steps


# --------------------------------------------------------------------------
# variance model

@dataclass(frozen=True)
class VarianceModel:
    """Independent per-segment decisions; level ``s`` has variance ``sigma / k_s``."""

    s_l: int
    scheme: FusionScheme = FusionScheme.UNIFORM

    def __post_init__(self):
        _check_level(self.s_l)
        object.__setattr__(self, "scheme", FusionScheme(self.scheme))


def variance_factor(vm: VarianceModel) -> float:
    """Fused variance as a multiple of ``sigma``, in closed form."""
    n = vm.s_l
    if vm.scheme is FusionScheme.UNIFORM:
        return (2.0 ** (2 * n + 2) - 4) / (2.0 ** (2 * n) * n * n * 3)
    return (2.0 ** (4 * n + 2) - 4) / (2.0 ** (2 * n) * (2.0 ** n - 1) ** 2 * 15)


def variance_factor_direct(vm: VarianceModel) -> float:
    """The same quantity as ``sum_s w_s**2 / k_s**2``."""
    w = fusion_weights(vm.s_l, vm.scheme).w
    return float(sum(ws * ws / (2.0 ** (vm.s_l - s)) ** 2 for s, ws in enumerate(w, start=1)))


@dataclass(frozen=True)
class MonteCarloResult:
    variance: float
    mean: float
    std_error: float
    trials: int


def variance_monte_carlo(vm: VarianceModel, sigma: float, trials: int = 100_000, seed=0,
                         mu: float = 0.0) -> MonteCarloResult:
    """Empirical variance and mean of the fused scalar over ``trials`` draws.

    Every level-``s`` segment decision is drawn independently as
    ``N(mu, sigma / k_s)``, ``sigma`` being a variance.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if trials < 2:
        raise ValueError("need at least two trials")
    rng = np.random.default_rng(seed)
    w = fusion_weights(vm.s_l, vm.scheme).w
    dev = np.zeros(trials)  # fused value minus mu; the weights sum to one
    for s, ws in enumerate(w, start=1):
        k = 2 ** (vm.s_l - s)
        draws = np.sqrt(sigma / k) * rng.standard_normal((trials, k))
        dev += ws * draws.mean(axis=1)
    var = float(dev.var(ddof=1))
    return MonteCarloResult(var, mu + float(dev.mean()), float(np.sqrt(var / trials)), trials)


__all__ = [
    "FusionScheme", "FusionWeights", "fusion_weights", "fuse", "decide", "ScaleBank",
    "bank_segment_probs", "fuse_chunks", "ProgressiveStep", "predict_progressive",
    "VarianceModel", "variance_factor", "variance_factor_direct", "MonteCarloResult",
    "variance_monte_carlo",
]
