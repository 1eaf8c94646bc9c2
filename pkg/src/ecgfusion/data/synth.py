"""Synthetic multi-class ECG generator.

Each beat is a sum of five Gaussian bumps (P, Q, R, S, T) laid over one RR
interval.  A per-class rhythm engine decides the RR sequence and which
template each beat uses; fibrillation and flutter classes add or substitute
band-limited oscillations.  Everything is driven by one seeded generator,
so a ``(class, seed, config)`` triple always yields the same samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InvalidDuration
from .records import CANONICAL_RATE, Dataset, EcgRecord


@dataclass(frozen=True)
class Wave:
    amplitude: float  # mV
    center: float  # fraction of the RR interval
    width: float  # Gaussian sigma, fraction of the RR interval


@dataclass(frozen=True)
class BeatTemplate:
    p: Wave
    q: Wave
    r: Wave
    s: Wave
    t: Wave

    def __post_init__(self):
        if any(w.width <= 0 for w in self.waves):
            raise ValueError("wave widths must be positive")
        centers = [w.center for w in self.waves]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ValueError(f"wave centers must be strictly increasing, got {centers}")

    @property
    def waves(self) -> tuple:
        return (self.p, self.q, self.r, self.s, self.t)

    def silent(self) -> "BeatTemplate":
        return replace(self, **{k: replace(getattr(self, k), amplitude=0.0) for k in "pqrst"})


NORMAL_BEAT = BeatTemplate(
    p=Wave(0.15, 0.15, 0.022),
    q=Wave(-0.12, 0.275, 0.008),
    r=Wave(1.0, 0.30, 0.009),
    s=Wave(-0.25, 0.325, 0.009),
    t=Wave(0.30, 0.58, 0.045),
)

# wide, P-less beat of ventricular origin
VENTRICULAR_BEAT = BeatTemplate(
    p=Wave(0.0, 0.10, 0.02),
    q=Wave(-0.05, 0.26, 0.015),
    r=Wave(1.3, 0.30, 0.028),
    s=Wave(-0.5, 0.36, 0.03),
    t=Wave(-0.4, 0.62, 0.06),
)


@dataclass(frozen=True)
class Ectopy:
    origin: str  # "atrial" or "ventricular"
    every: int | None = None  # fixed pattern: every n-th beat is ectopic
    prob: float = 0.0  # otherwise each beat is ectopic with this probability
    coupling: float = 0.6  # preceding RR as a fraction of the base RR
    pause: float = 1.4  # following RR as a fraction of the base RR


@dataclass(frozen=True)
class RhythmClass:
    id: int
    name: str
    hr_range: tuple = (60.0, 90.0)  # bpm
    rr_jitter: float = 0.02  # relative std of beat-to-beat RR
    engine: str = "sinus"
    template: BeatTemplate = NORMAL_BEAT
    ectopy: Ectopy | None = None
    fib_band: tuple | None = None  # (low Hz, high Hz, amplitude mV)
    resp_depth: float = 0.0  # sinus arrhythmia RR modulation depth
    atrial_rate: tuple | None = None  # bpm range for flutter / dissociated P waves
    drop_every: tuple = ()  # AV block II: candidate conduction ratios


@dataclass(frozen=True)
class NoiseConfig:
    baseline_amp: float = 0.05
    gaussian_std: float = 0.01
    powerline_amp: float = 0.0
    powerline_hz: float = 50.0


def _t(**kv):
    return replace(NORMAL_BEAT, **kv)


_CLASSES = [
    RhythmClass(0, "N"),
    RhythmClass(1, "RAF", (80, 150), 0.22, "atrial_fib", _t(p=Wave(0.0, 0.15, 0.022)), fib_band=(4.0, 6.5, 0.12)),
    RhythmClass(2, "FAF", (80, 150), 0.22, "atrial_fib", _t(p=Wave(0.0, 0.15, 0.022)), fib_band=(6.5, 10.0, 0.05)),
    RhythmClass(3, "AF", engine="flutter", template=_t(p=Wave(0.0, 0.15, 0.022)), atrial_rate=(250, 320)),
    RhythmClass(4, "SA", (55, 85), 0.03, resp_depth=0.18),
    RhythmClass(5, "AT", (100, 140), 0.02, template=_t(p=Wave(-0.12, 0.17, 0.018))),
    RhythmClass(6, "ST", (150, 200), 0.01, template=_t(p=Wave(0.0, 0.15, 0.022), t=Wave(0.22, 0.62, 0.05))),
    RhythmClass(7, "PAC", ectopy=Ectopy("atrial", prob=0.2, coupling=0.65, pause=1.1)),
    RhythmClass(8, "VB", ectopy=Ectopy("ventricular", every=2)),
    RhythmClass(9, "VTr", ectopy=Ectopy("ventricular", every=3)),
    RhythmClass(10, "PVCCI", ectopy=Ectopy("ventricular", prob=0.15, coupling=0.45, pause=1.55)),
    RhythmClass(11, "VTa", (140, 200), 0.02, template=VENTRICULAR_BEAT),
    RhythmClass(12, "RVF", engine="ventricular_fib", fib_band=(3.0, 5.5, 0.6)),
    RhythmClass(13, "FVF", engine="ventricular_fib", fib_band=(5.5, 9.0, 0.2)),
    RhythmClass(14, "AVB-I", template=BeatTemplate(
        p=Wave(0.15, 0.06, 0.022), q=Wave(-0.12, 0.375, 0.008), r=Wave(1.0, 0.40, 0.009),
        s=Wave(-0.25, 0.425, 0.009), t=Wave(0.30, 0.68, 0.045))),
    RhythmClass(15, "AVB-II", (65, 95), engine="av_block_2", drop_every=(3, 4)),
    RhythmClass(16, "AVB-III", (30, 45), 0.01, "av_block_3", VENTRICULAR_BEAT, atrial_rate=(60, 90)),
    RhythmClass(17, "RBBB", template=_t(q=Wave(-0.05, 0.27, 0.01), r=Wave(0.8, 0.30, 0.016),
                                        s=Wave(-0.5, 0.345, 0.02), t=Wave(-0.15, 0.6, 0.05))),
    RhythmClass(18, "LBBB", template=_t(q=Wave(0.0, 0.27, 0.01), r=Wave(1.0, 0.31, 0.03),
                                        s=Wave(-0.05, 0.37, 0.015), t=Wave(-0.25, 0.62, 0.055))),
    RhythmClass(19, "PVC", ectopy=Ectopy("ventricular", prob=0.15)),
]

CATALOG = {c.name: c for c in _CLASSES}
CLASS_NAMES = [c.name for c in _CLASSES]


def rhythm_class(key) -> RhythmClass:
    """Look a class up by name or id."""
    if isinstance(key, RhythmClass):
        return key
    if isinstance(key, (int, np.integer)):
        if not 0 <= key < len(_CLASSES):
            raise KeyError(f"no rhythm class with id {key}")
        return _CLASSES[int(key)]
    try:
        return CATALOG[key]
    except KeyError:
        raise KeyError(f"unknown rhythm class {key!r}; known: {', '.join(CLASS_NAMES)}") from None


def synth_beat(template: BeatTemplate, rr_samples: int) -> np.ndarray:
    t = np.arange(rr_samples) / rr_samples
    out = np.zeros(rr_samples)
    for w in template.waves:
        if w.amplitude:
            out += w.amplitude * np.exp(-((t - w.center) ** 2) / (2 * w.width**2))
    return out


def _adapt(template: BeatTemplate, rr_samples: int, rate: int) -> BeatTemplate:
    """Re-time a template defined at a 1 s RR for a beat of ``rr_samples``.

    QRS keeps its absolute duration; P and T offsets follow a square-root law.
    """
    k = rate / rr_samples
    rk = math.sqrt(k)
    rc = template.r.center

    def move(w, scale):
        return Wave(w.amplitude, rc + (w.center - rc) * scale, w.width * scale)

    q, r, s = move(template.q, k), replace(template.r, width=template.r.width * k), move(template.s, k)
    p, t = move(template.p, rk), move(template.t, rk)
    p = replace(p, center=min(max(p.center, 0.01), q.center - 1e-3))
    t = replace(t, center=min(max(t.center, s.center + 1e-3), 0.98))
    return BeatTemplate(p, q, r, s, t)


def _bandlimited(n: int, rate: int, lo: float, hi: float, rng) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / rate)
    spec[(f < lo) | (f > hi)] = 0
    x = np.fft.irfft(spec, n)
    sd = x.std()
    return x / sd if sd > 0 else x


def _beat_plan(cls: RhythmClass, total: int, rate: int, rng, flutter_bpm: float = 0.0):
    """List of ``(rr_samples, template)`` covering at least ``total`` samples."""
    hr = rng.uniform(*cls.hr_range)
    base = 60.0 / hr * rate
    plan = []
    covered = 0
    i = 0
    resp_f = rng.uniform(0.2, 0.33)
    resp_phase = rng.uniform(0, 2 * np.pi)
    if cls.engine == "flutter":
        ratio = int(rng.choice([2, 3, 4]))
        base = ratio * 60.0 / flutter_bpm * rate
    drop = int(rng.choice(cls.drop_every)) if cls.drop_every else 0
    ect = cls.ectopy
    ect_template = VENTRICULAR_BEAT if ect and ect.origin == "ventricular" else _t(p=Wave(-0.08, 0.2, 0.015))
    pending_pause = False
    while covered < total:
        jitter = cls.rr_jitter
        rr = base
        if cls.engine == "atrial_fib":
            rr = base * rng.uniform(1 - 1.5 * jitter, 1 + 1.5 * jitter)
        else:
            rr = base * (1 + jitter * rng.standard_normal())
        if cls.resp_depth:
            rr *= 1 + cls.resp_depth * math.sin(2 * np.pi * resp_f * covered / rate + resp_phase)
        template = cls.template
        if pending_pause:
            rr *= ect.pause
            template = ect_template
            pending_pause = False
        elif ect is not None:
            hit = (i % ect.every == ect.every - 1) if ect.every else rng.random() < ect.prob
            if hit:
                # next beat is premature: shorten this interval, stretch the following one
                rr *= ect.coupling
                pending_pause = True
        if drop and i % drop == drop - 1:
            template = replace(template, q=replace(template.q, amplitude=0.0), r=replace(template.r, amplitude=0.0),
                               s=replace(template.s, amplitude=0.0), t=replace(template.t, amplitude=0.0))
        rr_s = max(int(round(rr)), rate // 5)
        plan.append((rr_s, template))
        covered += rr_s
        i += 1
    return plan


def synth_record(cls, duration_s: float, rate: int = CANONICAL_RATE, seed=0,
                 noise: NoiseConfig = NoiseConfig()) -> EcgRecord:
    """Generate one labelled record of ``round(duration_s * rate)`` samples."""
    cls = rhythm_class(cls)
    if not (duration_s > 0 and math.isfinite(duration_s)) or round(duration_s * rate) < 1:
        raise InvalidDuration(f"duration must give at least one sample, got {duration_s} s at {rate} Hz")
    n = int(round(duration_s * rate))
    rng = np.random.default_rng(seed)
    gain = rng.uniform(0.8, 1.2)
    t = np.arange(n) / rate
    if cls.engine == "ventricular_fib":
        lo, hi, amp = cls.fib_band
        envelope = 1 + 0.3 * np.sin(2 * np.pi * rng.uniform(0.1, 0.3) * t + rng.uniform(0, 2 * np.pi))
        x = amp * envelope * _bandlimited(n, rate, lo, hi, rng)
    else:
        offset = int(rng.integers(0, rate))
        flutter_bpm = rng.uniform(*cls.atrial_rate) if cls.engine == "flutter" else 0.0
        plan = _beat_plan(cls, n + offset, rate, rng, flutter_bpm)
        x = np.concatenate([synth_beat(_adapt(tpl, rr, rate), rr) for rr, tpl in plan])[offset : offset + n]
        if cls.engine == "atrial_fib":
            lo, hi, amp = cls.fib_band
            x = x + amp * _bandlimited(n, rate, lo, hi, rng)
        elif cls.engine == "flutter":
            f = flutter_bpm / 60.0
            phase = rng.uniform()
            x = x + 0.15 * (1 - 2 * ((f * t + phase) % 1.0))
        elif cls.engine == "av_block_3":
            period = 60.0 / rng.uniform(*cls.atrial_rate)
            first = rng.uniform(0, period)
            for c in np.arange(first, t[-1] + period, period):
                x = x + 0.15 * np.exp(-((t - c) ** 2) / (2 * 0.022**2))
    x = gain * x
    if noise.baseline_amp:
        x = x + noise.baseline_amp * np.sin(2 * np.pi * rng.uniform(0.15, 0.4) * t + rng.uniform(0, 2 * np.pi))
    if noise.gaussian_std:
        x = x + rng.normal(0.0, noise.gaussian_std, n)
    if noise.powerline_amp:
        x = x + noise.powerline_amp * np.sin(2 * np.pi * noise.powerline_hz * t + rng.uniform(0, 2 * np.pi))
    return EcgRecord(x, rate, cls.id)


def generate_dataset(classes=None, per_class: int = 120, duration_s: float = 32.0, rate: int = CANONICAL_RATE,
                     seed: int = 0, noise: NoiseConfig = NoiseConfig(), relabel: bool = False) -> Dataset:
    """``per_class`` records for each requested class (all 20 by default).

    Labels are catalogue ids unless ``relabel`` is set, in which case the
    requested classes are numbered ``0..k-1`` in the order given.
    """
    chosen = [rhythm_class(c) for c in (classes if classes is not None else CLASS_NAMES)]
    records = []
    for j, cls in enumerate(chosen):
        for i in range(per_class):
            rec = synth_record(cls, duration_s, rate, np.random.SeedSequence([seed, cls.id, i]), noise)
            if relabel:
                rec = EcgRecord(rec.samples, rate, j)
            records.append(rec)
    if relabel:
        return Dataset(records, rate, len(chosen), [c.name for c in chosen])
    return Dataset(records, rate, len(CLASS_NAMES), list(CLASS_NAMES))


__all__ = [
    "Wave", "BeatTemplate", "Ectopy", "RhythmClass", "NoiseConfig", "NORMAL_BEAT", "VENTRICULAR_BEAT",
    "CATALOG", "CLASS_NAMES", "rhythm_class", "synth_beat", "synth_record", "generate_dataset",
]
