from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecgfusion import data
from ecgfusion.data import BeatTemplate, Dataset, EcgRecord, NoiseConfig, Wave
from ecgfusion.errors import (BadLabel, BadMagic, InvalidDuration, NotPowerOfTwoLength, RaggedCsvRow,
                              TruncatedFile, VersionUnsupported)

QUIET = NoiseConfig(0.0, 0.0, 0.0)


def count_peaks(x, min_gap=100):
    """Local maxima above half the global max, merged within ``min_gap`` samples."""
    thr = 0.5 * x.max()
    idx = np.flatnonzero((x[1:-1] > thr) & (x[1:-1] >= x[:-2]) & (x[1:-1] > x[2:])) + 1
    kept = []
    for i in idx:
        if not kept or i - kept[-1] > min_gap:
            kept.append(i)
    return len(kept)


# --- records --------------------------------------------------------------

def test_record_invariants():
    with pytest.raises(ValueError):
        EcgRecord(np.array([]))
    with pytest.raises(ValueError):
        EcgRecord(np.array([0.0, np.inf]))
    r = EcgRecord([1, 2, 3], label=2)
    assert r.samples.dtype == np.float32 and len(r) == 3


def test_dataset_invariants():
    with pytest.raises(BadLabel):
        Dataset([EcgRecord([1.0], label=5)], num_classes=3)
    with pytest.raises(ValueError):
        Dataset([EcgRecord([1.0], sample_rate_hz=256)])


def test_catalog_bijection():
    assert len(data.CATALOG) == 20
    assert [data.rhythm_class(i).name for i in range(20)] == data.CLASS_NAMES
    assert all(data.rhythm_class(n).id == i for i, n in enumerate(data.CLASS_NAMES))
    assert data.CLASS_NAMES[:3] == ["N", "RAF", "FAF"] and data.CLASS_NAMES[-1] == "PVC"


# --- beats ----------------------------------------------------------------

def test_silent_beat():
    assert not data.synth_beat(data.NORMAL_BEAT.silent(), 400).any()


@pytest.mark.parametrize("rr", [200, 333, 512, 1000])
def test_r_only_peak(rr):
    tpl = data.NORMAL_BEAT.silent()
    tpl = replace(tpl, r=Wave(1.0, 0.3, 0.01))
    assert np.argmax(data.synth_beat(tpl, rr)) == round(0.3 * rr)


def test_normal_beat_peak():
    beat = data.synth_beat(data.NORMAL_BEAT, 512)
    assert np.isfinite(beat.sum())
    assert abs(beat.max() - data.NORMAL_BEAT.r.amplitude) < 0.05 * data.NORMAL_BEAT.r.amplitude


def test_template_invariants():
    w = Wave(0.1, 0.5, 0.01)
    with pytest.raises(ValueError):
        BeatTemplate(w, w, w, w, w)
    with pytest.raises(ValueError):
        replace(data.NORMAL_BEAT, p=Wave(0.1, 0.15, 0.0))


# --- records from the generator -------------------------------------------

def fixed_rate(name, bpm):
    return replace(data.rhythm_class(name), hr_range=(bpm, bpm), rr_jitter=0.0)


def test_normal_60_bpm_peak_count():
    for seed in range(5):
        rec = data.synth_record(fixed_rate("N", 60), 4, seed=seed, noise=QUIET)
        assert abs(count_peaks(rec.samples) - 4) <= 1


def test_tachycardia_has_more_peaks():
    for seed in range(5):
        n = count_peaks(data.synth_record(fixed_rate("N", 60), 4, seed=seed, noise=QUIET).samples)
        s = count_peaks(data.synth_record(fixed_rate("ST", 150), 4, seed=seed, noise=QUIET).samples)
        assert s >= 1.5 * n


@pytest.mark.parametrize("name", data.CLASS_NAMES)
def test_every_class_generates(name):
    rec = data.synth_record(data.rhythm_class(name), 8, seed=1)
    assert len(rec) == 4096 and np.all(np.isfinite(rec.samples)) and rec.label == data.rhythm_class(name).id
    assert rec.samples.std() > 0.05


@given(st.sampled_from(data.CLASS_NAMES), st.integers(0, 2**32 - 1))
def test_generator_deterministic(name, seed):
    a = data.synth_record(data.rhythm_class(name), 2, seed=seed)
    b = data.synth_record(data.rhythm_class(name), 2, seed=seed)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_seeds_differ():
    a = data.synth_record(data.rhythm_class("N"), 2, seed=1)
    b = data.synth_record(data.rhythm_class("N"), 2, seed=2)
    assert not np.array_equal(a.samples, b.samples)


def test_invalid_duration():
    for bad in (0, -1, float("nan")):
        with pytest.raises(InvalidDuration):
            data.synth_record(data.rhythm_class("N"), bad)


def test_generate_dataset_labels():
    ds = data.generate_dataset(["N", "ST"], per_class=3, duration_s=1)
    assert ds.num_classes == 20 and sorted(set(ds.labels)) == [0, 6]
    rel = data.generate_dataset(["N", "ST"], per_class=3, duration_s=1, relabel=True)
    assert rel.num_classes == 2 and sorted(set(rel.labels)) == [0, 1] and rel.class_names == ["N", "ST"]


# --- augmentation ---------------------------------------------------------

def test_rotation_examples(rng):
    rec = EcgRecord(rng.standard_normal(100), label=3)
    assert data.rotate(rec, 0) == rec
    assert data.rotate(data.rotate(rec, 37), 100 - 37) == rec
    out = data.augment_shift(rec, seed=4)
    assert out.label == 3
    assert out.samples.mean() == pytest.approx(rec.samples.mean(), rel=1e-6)
    assert np.array_equal(np.sort(out.samples), np.sort(rec.samples))


@given(st.integers(1, 300), st.integers(0, 10_000))
def test_augment_is_rotation(n, seed):
    x = np.arange(n, dtype=float)
    out = data.augment_shift(EcgRecord(x), seed).samples
    k = int(out[0])
    np.testing.assert_array_equal(out, np.concatenate([x[k:], x[:k]]))


# --- segmentation ---------------------------------------------------------

@pytest.mark.parametrize("length,counts", [(512, [1]), (2048, [4, 2, 1]), (16_384, [32, 16, 8, 4, 2, 1])])
def test_segment_counts(length, counts):
    rec = EcgRecord(np.arange(length, dtype=float))
    levels = data.segment(rec)
    assert [len(l) for l in levels] == counts
    for s, segs in enumerate(levels, start=1):
        assert all(len(p) == 512 * 2 ** (s - 1) for p in segs)
    if length == 512:
        assert levels[0][0] == rec


@pytest.mark.parametrize("length", [100, 511, 1024 + 512, 2**16])
def test_segment_rejects(length):
    with pytest.raises(NotPowerOfTwoLength):
        data.segment(EcgRecord(np.ones(length)))


@given(st.integers(1, 6), st.integers(0, 1000))
def test_segments_reassemble(s_l, seed):
    x = np.random.default_rng(seed).standard_normal(512 * 2 ** (s_l - 1)).astype(np.float32)
    rec = EcgRecord(x, label=1)
    for segs in data.segment(rec):
        assert np.array_equal(np.concatenate([p.samples for p in segs]), rec.samples)
        assert all(p.label == 1 for p in segs)


# --- fit_length -----------------------------------------------------------

def test_fit_length_examples():
    x = np.arange(20_000, dtype=float)
    assert np.array_equal(data.fit_length(EcgRecord(x)).samples, x[:16_384])
    short = np.arange(9_000, dtype=float)
    out = data.fit_length(EcgRecord(short)).samples
    assert np.array_equal(out, np.concatenate([short, short])[:16_384])
    exact = EcgRecord(np.arange(16_384, dtype=float))
    assert data.fit_length(exact) == exact


@given(st.integers(1, 40_000), st.integers(1, 5000))
def test_fit_length_property(n, target):
    out = data.fit_length(EcgRecord(np.arange(n % 997 + 1, dtype=float)), target)
    assert len(out) == target


# --- folds ----------------------------------------------------------------

def test_folds_one_of_each():
    labels = np.repeat([0, 1, 2], 3)
    folds = data.split_folds(labels, 3, seed=0)
    assert all(sorted(labels[f]) == [0, 1, 2] for f in folds)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=80), st.integers(1, 6), st.integers(0, 100))
def test_folds_partition_and_stratify(labels, k, seed):
    labels = np.array(labels)
    folds = data.split_folds(labels, k, seed)
    allidx = np.concatenate(folds)
    assert sorted(allidx) == list(range(len(labels)))
    for c in np.unique(labels):
        counts = [int(np.sum(labels[f] == c)) for f in folds]
        assert max(counts) - min(counts) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    again = data.split_folds(labels, k, seed)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))


# --- file formats ---------------------------------------------------------

def random_dataset(seed):
    r = np.random.default_rng(seed)
    recs = [EcgRecord(r.standard_normal(int(r.integers(1, 300))),
                      label=None if r.random() < 0.2 else int(r.integers(0, 7))) for _ in range(r.integers(0, 6))]
    return Dataset(recs, 512, 7)


def test_dataset_round_trip(tmp_path):
    ds = random_dataset(3)
    data.write_dataset(tmp_path / "d.ecgd", ds)
    back = data.read_dataset(tmp_path / "d.ecgd")
    assert back.records == ds.records and back.num_classes == 7 and back.sample_rate == 512
    assert data.dataset_to_bytes(back) == (tmp_path / "d.ecgd").read_bytes()


def test_dataset_header_layout():
    raw = data.dataset_to_bytes(Dataset([EcgRecord([1.5], label=2)], 512, 4))
    assert raw[:4] == b"ECGD"
    assert list(np.frombuffer(raw[4:28], "<u4")) == [1, 512, 4, 1, 2, 1]
    assert np.frombuffer(raw[28:], "<f4").tolist() == [1.5]


def test_dataset_errors():
    raw = data.dataset_to_bytes(random_dataset(1))
    with pytest.raises(BadMagic):
        data.dataset_from_bytes(b"ECGM" + raw[4:])
    with pytest.raises(VersionUnsupported):
        data.dataset_from_bytes(raw[:4] + (2).to_bytes(4, "little") + raw[8:])
    with pytest.raises(TruncatedFile):
        data.dataset_from_bytes(raw[:-2])
    with pytest.raises(TruncatedFile):
        data.dataset_from_bytes(raw[:10])


def test_csv_import(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("2,0.1,0.2\n")
    ds = data.import_csv(p)
    assert len(ds) == 1 and ds.records[0].label == 2 and len(ds.records[0]) == 2
    assert ds.records[0].samples.tolist() == pytest.approx([0.1, 0.2])


def test_csv_errors(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("0,1,2\n1,1,2,3\n")
    with pytest.raises(RaggedCsvRow) as e:
        data.import_csv(p)
    assert e.value.line == 2
    p.write_text("0,1\nx,2\n")
    with pytest.raises(BadLabel) as e:
        data.import_csv(p)
    assert e.value.line == 2
