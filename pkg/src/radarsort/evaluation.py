"""Train/test splitting, confusion matrices and accuracy reports."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .domain import CLASS_LABELS, NUM_CLASSES, MaterialClass
from .errors import ConfigError, DataError, EmptyDatasetError, InvalidCodeError, SchemaError

REPORT_FORMAT = "radarsort-report"
REPORT_VERSION = 1


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _apportion(sizes: Sequence[int], fraction: float) -> list[int]:
    """Test-set size per stratum, summing to round(sum(sizes) * fraction).

    Each stratum gets floor(size * fraction); remaining seats go to the largest
    fractional remainders (ties -> earlier stratum). Strata of size 1 are left
    out of the total and never contribute a test record; every stratum keeps at
    least one record for training.
    """
    exact = [s * fraction for s in sizes]
    alloc = [int(math.floor(e)) for e in exact]
    cap = [max(s - 1, 0) for s in sizes]
    alloc = [min(a, c) for a, c in zip(alloc, cap)]
    target = min(_round_half_up(sum(s for s in sizes if s > 1) * fraction), sum(cap))
    spare = target - sum(alloc)
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - math.floor(exact[i])), i))
    while spare > 0:
        progressed = False
        for i in order:
            if spare == 0:
                break
            if alloc[i] < cap[i]:
                alloc[i] += 1
                spare -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def train_test_split(
    labels: Sequence[int],
    test_fraction: float,
    seed: int,
    *,
    stratify: bool = True,
    groups: Sequence[int] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle-and-split of record indices.

    Args:
        labels: class code of every record.
        test_fraction: share of records (or containers) sent to the test set.
        seed: permutation seed.
        stratify: split each class separately so small classes keep test
            representation. Ignored when ``groups`` is given (group splits are
            always per class).
        groups: optional container id per record; when given, whole containers
            go to one side so no physical object appears in both sets.

    Returns:
        Sorted ``(train_idx, test_idx)`` integer arrays that partition ``range(N)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n < 2:
        raise EmptyDatasetError("splitting needs at least 2 records")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)

    if groups is None and not stratify:
        n_test = min(max(_round_half_up(n * test_fraction), 0), n - 1)
        test = perm[:n_test]
        train = perm[n_test:]
        return np.sort(train), np.sort(test)

    classes = sorted(set(labels.tolist()))
    if groups is None:
        # Units are single records, visited in permuted order.
        units_by_class = [[[int(i)] for i in perm if labels[i] == c] for c in classes]
    else:
        groups = np.asarray(groups, dtype=np.int64)
        if groups.shape != labels.shape:
            raise DataError("groups must have one entry per record")
        units_by_class = []
        for c in classes:
            members: dict[int, list[int]] = {}
            for i in perm:  # first appearance in the permutation fixes group order
                if labels[i] == c:
                    members.setdefault(int(groups[i]), []).append(int(i))
            units_by_class.append(list(members.values()))

    for c, units in zip(classes, units_by_class):
        if len(units) == 1:
            warnings.warn(
                f"class {c} has a single {'record' if groups is None else 'container'}; "
                "it goes to the training set",
                stacklevel=2,
            )
    alloc = _apportion([len(u) for u in units_by_class], test_fraction)
    test: list[int] = []
    train: list[int] = []
    for units, k in zip(units_by_class, alloc):
        for u in units[:k]:
            test.extend(u)
        for u in units[k:]:
            train.extend(u)
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are actual classes, columns predicted classes, in class-code order."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (NUM_CLASSES, NUM_CLASSES):
            raise DataError(f"confusion matrix must be {NUM_CLASSES}x{NUM_CLASSES}, got {c.shape}")
        if np.any(c < 0):
            raise DataError("confusion counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise EmptyDatasetError("accuracy of an empty confusion matrix is undefined")
        return self.correct / self.total

    def misclassifications(self) -> int:
        return self.total - self.correct

    def cell(self, actual: MaterialClass, predicted: MaterialClass) -> int:
        return int(self.counts[int(actual), int(predicted)])


def confusion_matrix(actuals: Sequence[int], predictions: Sequence[int]) -> ConfusionMatrix:
    a = np.asarray([int(v) for v in actuals], dtype=np.int64)
    p = np.asarray([int(v) for v in predictions], dtype=np.int64)
    if a.shape != p.shape:
        raise DataError(f"{len(a)} actual labels but {len(p)} predictions")
    if a.size == 0:
        raise EmptyDatasetError("nothing to evaluate")
    for arr in (a, p):
        if arr.min() < 0 or arr.max() >= NUM_CLASSES:
            raise InvalidCodeError("class codes must lie in 0..4")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (a, p), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    support: int
    precision_defined: bool
    recall_defined: bool


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    matrix: ConfusionMatrix
    accuracy: float
    per_class: dict[str, ClassMetrics]

    def to_dict(self) -> dict[str, Any]:
        per_class = {}
        for name, m in self.per_class.items():
            entry: dict[str, Any] = {
                "precision": m.precision,
                "recall": m.recall,
                "support": m.support,
            }
            undefined = [k for k, ok in (("precision", m.precision_defined), ("recall", m.recall_defined)) if not ok]
            if undefined:
                entry["undefined"] = undefined
            per_class[name] = entry
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "accuracy": self.accuracy,
            "total": self.matrix.total,
            "class_order": list(CLASS_LABELS),
            "per_class": per_class,
            "matrix": self.matrix.counts.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        width = max(len(n) for n in CLASS_LABELS) + 2
        lines = [f"accuracy: {self.accuracy:.4f} ({self.matrix.correct}/{self.matrix.total})", ""]
        lines.append("actual \\ predicted".ljust(width + 4) + "".join(n.rjust(width) for n in CLASS_LABELS))
        for name, row in zip(CLASS_LABELS, self.matrix.counts):
            lines.append(name.ljust(width + 4) + "".join(str(v).rjust(width) for v in row))
        lines.append("")
        lines.append("class".ljust(width) + "precision".rjust(11) + "recall".rjust(9) + "support".rjust(9))
        for name, m in self.per_class.items():
            flag = "" if m.precision_defined and m.recall_defined else "  (undefined -> 0)"
            lines.append(
                name.ljust(width)
                + f"{m.precision:11.4f}{m.recall:9.4f}{m.support:9d}"
                + flag
            )
        return "\n".join(lines) + "\n"


def report(cm: ConfusionMatrix) -> EvaluationReport:
    """Accuracy plus per-class precision/recall; 0/0 is reported as 0 and flagged."""
    if cm.total == 0:
        raise EmptyDatasetError("cannot report on an empty evaluation")
    counts = cm.counts
    per_class = {}
    for i, name in enumerate(CLASS_LABELS):
        tp = int(counts[i, i])
        predicted = int(counts[:, i].sum())
        support = int(counts[i, :].sum())
        per_class[name] = ClassMetrics(
            precision=tp / predicted if predicted else 0.0,
            recall=tp / support if support else 0.0,
            support=support,
            precision_defined=predicted > 0,
            recall_defined=support > 0,
        )
    return EvaluationReport(cm, cm.accuracy, per_class)


def matrix_from_report(doc: Mapping[str, Any]) -> ConfusionMatrix:
    if doc.get("format") != REPORT_FORMAT or doc.get("version") != REPORT_VERSION:
        raise SchemaError("not a supported evaluation report")
    if list(doc.get("class_order", [])) != list(CLASS_LABELS):
        raise SchemaError("report class order differs from this build")
    cm = ConfusionMatrix(doc["matrix"])
    if cm.total != doc["total"]:
        raise SchemaError("report total does not match its matrix")
    return cm
