import numpy as np
import pytest

from ecgfusion import experiment, fusion, nn, optim
from ecgfusion.data import Dataset, EcgRecord
from ecgfusion.errors import EmptyDataset


def dataset(n=4, length=2048, seed=0):
    r = np.random.default_rng(seed)
    return Dataset([EcgRecord(r.standard_normal(length), label=i % 2) for i in range(n)], 512, 2)


def test_segment_dataset_counts():
    segs, labels = experiment.segment_dataset(dataset(), 2, augment_copies=1)
    assert segs.shape == (4 * 2 * 2, 1024)
    assert labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 1] * 2
    with pytest.raises(EmptyDataset):
        experiment.segment_dataset(Dataset([]), 1)


def test_level_of_presets():
    assert [experiment.level_of(nn.h_level(s)) for s in range(1, 7)] == list(range(1, 7))
    assert experiment.level_of(nn.baseline_1d()) == 1
    with pytest.raises(ValueError):
        experiment.spec_for("baseline_1d", 2, 4)


def test_baseline_inputs_are_raw():
    segs = np.arange(1024.0).reshape(2, 512)
    x = experiment.model_inputs(nn.baseline_1d(), segs, 1)
    assert x.shape == (2, 1, 1, 512) and x[1, 0, 0, 0] == 512


def test_fused_level1_matches_single_model():
    ds = dataset()
    models = [nn.init_model(nn.h_level(s, 2), seed=s) for s in (1, 2, 3)]
    fused = experiment.fused_predictions(fusion.ScaleBank(models), ds, 3)
    preds, labels = experiment.segment_predictions(models[0], ds)
    assert np.array_equal(fused[1][0], preds) and np.array_equal(fused[1][1], labels)
    assert len(fused[3][0]) == 4 and len(fused[2][0]) == 8


def test_train_bank_seeds_differ_per_level():
    ds = dataset(length=1024)
    cfg = optim.TrainConfig(total_iters=2, batch_size=2)
    models, hists = experiment.train_bank(ds, [1, 2], cfg)
    assert [m.spec.input_dims[-1] for m in models] == [4, 8] and all(len(h.loss) == 2 for h in hists)
