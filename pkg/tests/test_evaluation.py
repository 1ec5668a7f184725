import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarsort.evaluation import (
    ConfusionMatrix,
    confusion_matrix,
    matrix_from_report,
    report,
    train_test_split,
)
from radarsort.errors import ConfigError, DataError, EmptyDatasetError


def half_up(x):
    return math.floor(x + 0.5)


# ---- split


def test_split_30_70_on_100_records():
    labels = np.repeat(np.arange(5), 20)
    train, test = train_test_split(labels, 0.30, seed=0)
    assert (len(train), len(test)) == (70, 30)
    assert list(np.bincount(labels[test])) == [6] * 5


def test_split_smallest_case():
    train, test = train_test_split([3, 3], 0.5, seed=1)
    assert len(train) == 1 and len(test) == 1


def test_split_singleton_class_goes_to_train():
    labels = [0, 0, 0, 0, 1]
    with pytest.warns(UserWarning, match="single"):
        train, test = train_test_split(labels, 0.5, seed=0)
    assert 4 in train
    assert len(test) == 2


def test_split_is_deterministic_and_seed_dependent():
    labels = np.random.default_rng(0).integers(0, 5, 300)
    a = train_test_split(labels, 0.3, seed=5)
    b = train_test_split(labels, 0.3, seed=5)
    c = train_test_split(labels, 0.3, seed=6)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[1], c[1])


def test_plain_shuffled_split():
    labels = [0] * 95 + [1] * 5
    train, test = train_test_split(labels, 0.3, seed=0, stratify=False)
    assert len(test) == 30 and len(train) == 70


def test_container_split_keeps_containers_whole():
    labels = np.repeat([0, 1, 2], 40)
    groups = np.tile(np.repeat(np.arange(4), 10), 3)
    train, test = train_test_split(labels, 0.25, seed=2, groups=groups)
    for c in range(3):
        tr = {(c, g) for g in groups[train][labels[train] == c]}
        te = {(c, g) for g in groups[test][labels[test] == c]}
        assert not tr & te
        assert len(te) == 1  # one of four containers per class
    assert len(test) == 30


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_bad_fraction(fraction):
    with pytest.raises(ConfigError):
        train_test_split([0, 1, 0, 1], fraction, 0)


def test_split_needs_two_records():
    with pytest.raises(EmptyDatasetError):
        train_test_split([0], 0.5, 0)


@settings(max_examples=200, deadline=None)
@given(
    counts=st.lists(st.integers(0, 60), min_size=5, max_size=5).filter(lambda c: sum(c) >= 2 and min(x for x in c if x) >= 2 if any(c) else False),
    fraction=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**32 - 1),
)
def test_split_partition_and_stratification(counts, fraction, seed):
    labels = np.repeat(np.arange(5), counts)
    labels = labels[np.random.default_rng(seed).permutation(len(labels))]
    train, test = train_test_split(labels, fraction, seed)
    # partition
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(len(labels)))
    assert not set(train.tolist()) & set(test.tolist())
    # total size
    caps = sum(n - 1 for n in counts if n)
    assert len(test) == min(half_up(len(labels) * fraction), caps)
    # stratification: each class within one record of its exact share, and never emptied of training data
    per_class_test = np.bincount(labels[test], minlength=5)
    for n, k in zip(counts, per_class_test):
        if n:
            assert abs(k - n * fraction) < 1.0 + 1e-9 or k == n - 1
            assert k <= n - 1


# ---- confusion matrix


def tally_oracle(actuals, predictions):
    pairs = Counter(zip(actuals, predictions))
    return [[pairs.get((a, p), 0) for p in range(5)] for a in range(5)]


def test_all_correct():
    labels = [0, 1, 2, 3, 4, 4, 1]
    cm = confusion_matrix(labels, labels)
    assert np.array_equal(cm.counts, np.diag(np.bincount(labels, minlength=5)))
    assert cm.accuracy == 1.0


def test_paper_like_matrix():
    actual = np.repeat(np.arange(5), 40)
    pred = actual.copy()
    plastic = np.flatnonzero(actual == 1)
    glass = np.flatnonzero(actual == 2)
    pred[plastic[:2]] = 2
    pred[glass[:2]] = 1
    cm = confusion_matrix(actual, pred)
    assert cm.total == 200
    assert cm.misclassifications() == 4
    assert cm.cell(1, 2) + cm.cell(2, 1) == 4
    assert cm.accuracy == 0.98


@pytest.mark.parametrize("seed", range(5))
def test_matrix_matches_tally_oracle(seed):
    rng = np.random.default_rng(seed)
    a, p = rng.integers(0, 5, 500), rng.integers(0, 5, 500)
    cm = confusion_matrix(a, p)
    assert cm.counts.tolist() == tally_oracle(a.tolist(), p.tolist())
    assert cm.total == 500
    assert 0.0 <= cm.accuracy <= 1.0


def test_confusion_matrix_errors():
    with pytest.raises(DataError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(EmptyDatasetError):
        confusion_matrix([], [])
    with pytest.raises(DataError):
        confusion_matrix([0, 5], [0, 1])


# ---- report


def test_report_diagonal():
    rep = report(confusion_matrix([0, 1, 2, 3, 4], [0, 1, 2, 3, 4]))
    assert rep.accuracy == 1.0
    for m in rep.per_class.values():
        assert (m.precision, m.recall, m.support) == (1.0, 1.0, 1)


def test_report_flags_never_predicted_class():
    rep = report(confusion_matrix([0, 1, 2], [0, 0, 2]))
    plastic = rep.per_class["plastic"]
    assert plastic.precision == 0.0 and not plastic.precision_defined
    assert plastic.recall == 0.0 and plastic.recall_defined
    doc = rep.to_dict()
    assert doc["per_class"]["plastic"]["undefined"] == ["precision"]
    assert doc["per_class"]["paper"]["undefined"] == ["precision", "recall"]
    assert "undefined" in rep.to_text()


def test_report_precision_recall_values():
    cm = ConfusionMatrix([[8, 2, 0, 0, 0], [1, 9, 0, 0, 0], [0, 0, 5, 0, 0], [0, 0, 0, 5, 0], [0, 0, 0, 0, 5]])
    rep = report(cm)
    assert rep.per_class["metal"].precision == 8 / 9
    assert rep.per_class["metal"].recall == 8 / 10
    assert rep.per_class["plastic"].precision == 9 / 11
    assert rep.accuracy == 32 / 35


def test_report_machine_readable_is_stable_and_round_trips():
    rng = np.random.default_rng(3)
    cm = confusion_matrix(rng.integers(0, 5, 100), rng.integers(0, 5, 100))
    a, b = report(cm).to_json(), report(ConfusionMatrix(cm.counts.copy())).to_json()
    assert a == b
    doc = json.loads(a)
    assert list(doc) == ["format", "version", "accuracy", "total", "class_order", "per_class", "matrix"]
    assert list(doc["per_class"]["metal"])[:3] == ["precision", "recall", "support"]
    assert matrix_from_report(doc) == cm


def test_report_empty_matrix():
    with pytest.raises(EmptyDatasetError):
        report(ConfusionMatrix(np.zeros((5, 5))))
