import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecgfusion import metrics
from ecgfusion.errors import LengthMismatch
from ecgfusion.metrics import ConfusionMatrix


def test_confusion_examples():
    cm = metrics.confusion([0, 1, 2], [0, 1, 2], 3)
    np.testing.assert_array_equal(cm.counts, np.eye(3, dtype=int))
    cm = metrics.confusion([1, 0], [0, 0], 2)
    assert cm.counts[0, 1] == 1 and cm.counts[0, 0] == 1 and cm.total == 2
    with pytest.raises(LengthMismatch):
        metrics.confusion([0, 1], [0], 2)
    with pytest.raises(ValueError):
        metrics.confusion([0, 3], [0, 0], 2)


def test_two_class_hand_values():
    cm = ConfusionMatrix(np.array([[8, 2], [1, 9]]))
    assert metrics.accuracy(cm) == pytest.approx(0.85)
    assert metrics.sensitivity(cm, 0) == pytest.approx(0.8)
    assert metrics.f1(cm, 0) == pytest.approx(16 / 19)
    assert metrics.specificity_paper(cm, normal_class=1) == pytest.approx(0.9)


def test_perfect_matrix():
    cm = ConfusionMatrix(np.diag([3, 4, 5]))
    assert metrics.accuracy(cm) == 1
    assert all(metrics.sensitivity(cm, i) == 1 and metrics.f1(cm, i) == 1 for i in range(3))
    assert metrics.mean_f1(cm) == 1 and not metrics.mean_f1(cm).degenerate


def test_degenerate_scores():
    cm = ConfusionMatrix(np.array([[2, 0], [0, 0]]))
    s = metrics.sensitivity(cm, 1)
    assert s == 0 and s.degenerate
    assert metrics.f1(cm, 1).degenerate and not metrics.f1(cm, 0).degenerate
    assert metrics.mean_f1(cm).degenerate and metrics.mean_f1(cm, [0]) == 1
    empty = ConfusionMatrix(np.zeros((2, 2), int))
    assert metrics.accuracy(empty) == 0 and metrics.accuracy(empty).degenerate


def test_mean_f1_subset():
    cm = ConfusionMatrix(np.array([[5, 0, 0], [0, 3, 2], [0, 2, 3]]))
    assert metrics.mean_f1(cm, [0]) == 1
    assert metrics.mean_f1(cm) == pytest.approx((1 + 0.6 + 0.6) / 3)


def confusions(max_c=5):
    return st.integers(2, max_c).flatmap(
        lambda c: st.lists(st.tuples(st.integers(0, c - 1), st.integers(0, c - 1)), min_size=1, max_size=60)
        .map(lambda pairs: (c, np.array(pairs))))


@given(confusions())
def test_weighted_recall_identity(data):
    c, pairs = data
    cm = metrics.confusion(pairs[:, 0], pairs[:, 1], c)
    rows = cm.counts.sum(axis=1)
    weighted = sum(float(metrics.sensitivity(cm, i)) * rows[i] for i in range(c)) / cm.total
    assert weighted == pytest.approx(float(metrics.accuracy(cm)), abs=1e-12)
    assert cm.total == len(pairs) and np.all(cm.counts >= 0)


@given(confusions())
def test_scores_in_unit_interval(data):
    c, pairs = data
    cm = metrics.confusion(pairs[:, 0], pairs[:, 1], c)
    scores = [metrics.accuracy(cm), metrics.mean_f1(cm), metrics.specificity_paper(cm)]
    scores += [metrics.sensitivity(cm, i) for i in range(c)] + [metrics.f1(cm, i) for i in range(c)]
    assert all(0 <= s <= 1 for s in scores)


@given(confusions(), st.randoms())
def test_permutation_equivariance(data, rnd):
    c, pairs = data
    perm = list(range(c))
    rnd.shuffle(perm)
    perm = np.array(perm)
    base = metrics.confusion(pairs[:, 0], pairs[:, 1], c)
    moved = metrics.confusion(perm[pairs[:, 0]], perm[pairs[:, 1]], c)
    assert metrics.accuracy(moved) == metrics.accuracy(base)
    for i in range(c):
        assert metrics.sensitivity(moved, perm[i]) == metrics.sensitivity(base, i)
        assert metrics.f1(moved, perm[i]) == metrics.f1(base, i)


def test_report_outputs():
    cm = ConfusionMatrix(np.array([[8, 2], [1, 9]]), ("N", "AF"))
    rep = metrics.Report(cm)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "class,support,sensitivity,f1,accuracy,specificity_paper,mean_f1"
    assert lines[1].startswith("N,10,0.800000,0.842105")
    assert lines[-1].startswith("overall,20,,,0.850000,0.800000")
    text = rep.summary()
    assert "specificity_paper" in text and "0.8500" in text


def test_score_repr():
    assert "degenerate" in repr(metrics.Score(0.0, True))
    assert isinstance(metrics.Score(0.5) + 1, float)
