"""Core value types: range axis, frames, classification windows, labels and features."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, InvalidCodeError, RangeAxisError

DEFAULT_FRAMES_PER_WINDOW = 30  # 15 fps at 0.5 Hz disc rotation


class MaterialClass(enum.IntEnum):
    METAL = 0
    PLASTIC = 1
    GLASS = 2
    PAPER = 3
    EMPTY = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "MaterialClass":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise DataError(f"unknown material label {label!r}") from None


CLASS_ORDER: tuple[MaterialClass, ...] = tuple(MaterialClass)
NUM_CLASSES = len(CLASS_ORDER)
CLASS_LABELS: tuple[str, ...] = tuple(c.label for c in CLASS_ORDER)


def class_code(c: MaterialClass) -> int:
    return int(MaterialClass(c))


def code_class(i: int) -> MaterialClass:
    """Inverse of :func:`class_code`; rejects anything outside 0..4."""
    if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
        raise InvalidCodeError(f"class code must be an integer, got {i!r}")
    if not 0 <= int(i) < NUM_CLASSES:
        raise InvalidCodeError(f"class code {i} outside 0..{NUM_CLASSES - 1}")
    return CLASS_ORDER[int(i)]


@dataclass(frozen=True)
class RangeAxis:
    """Uniform distance axis of the radar sweep, in millimetres."""

    start_mm: float = 100.0
    step_mm: float = 2.5
    num_bins: int = 120

    def __post_init__(self):
        object.__setattr__(self, "start_mm", float(self.start_mm))
        object.__setattr__(self, "step_mm", float(self.step_mm))
        if not (math.isfinite(self.start_mm) and math.isfinite(self.step_mm)):
            raise DataError("range axis start/step must be finite")
        if self.step_mm <= 0:
            raise DataError(f"range axis step must be positive, got {self.step_mm}")
        if int(self.num_bins) != self.num_bins or self.num_bins < 2:
            raise DataError(f"range axis needs at least 2 bins, got {self.num_bins}")

    @property
    def stop_mm(self) -> float:
        """Centre of the last bin."""
        return self.start_mm + (self.num_bins - 1) * self.step_mm

    def bin_center(self, i: int) -> float:
        if not 0 <= i < self.num_bins:
            raise RangeAxisError(f"bin {i} outside 0..{self.num_bins - 1}")
        return self.start_mm + i * self.step_mm

    def centers(self) -> np.ndarray:
        return self.start_mm + self.step_mm * np.arange(self.num_bins)

    def bin_for_distance(self, d: float) -> int:
        return bin_for_distance(self, d)

    def to_dict(self) -> dict[str, Any]:
        return {"start_mm": self.start_mm, "step_mm": self.step_mm, "num_bins": self.num_bins}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RangeAxis":
        return cls(float(d["start_mm"]), float(d["step_mm"]), int(d["num_bins"]))


def bin_for_distance(axis: RangeAxis, d: float) -> int:
    """Index of the bin whose centre is nearest ``d``; exact midpoints go to the lower bin."""
    if not math.isfinite(d) or d < axis.start_mm or d > axis.stop_mm:
        raise RangeAxisError(
            f"distance {d} mm outside range axis [{axis.start_mm}, {axis.stop_mm}] mm"
        )
    x = (d - axis.start_mm) / axis.step_mm
    return min(int(math.ceil(x - 0.5)), axis.num_bins - 1)


def _checked_amplitudes(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains non-finite amplitudes")
    if np.any(arr < 0):
        raise DataError(f"{what} contains negative amplitudes")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Frame:
    """One radar sweep: amplitude per range bin, full scale 1.0."""

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = _checked_amplitudes(self.amplitudes, "frame")
        if arr.ndim != 1:
            raise DataError("frame amplitudes must be one-dimensional")
        object.__setattr__(self, "amplitudes", arr)

    def __len__(self):
        return len(self.amplitudes)


@dataclass(frozen=True, eq=False)
class ClassificationWindow:
    """One disc revolution of frames, stored as a (frames, bins) array."""

    amplitudes: np.ndarray
    axis: RangeAxis = field(default_factory=RangeAxis)
    frames_per_window: int = DEFAULT_FRAMES_PER_WINDOW

    def __post_init__(self):
        arr = _checked_amplitudes(self.amplitudes, "window")
        if arr.ndim != 2:
            raise DataError("window amplitudes must be a (frames, bins) array")
        if arr.shape[0] != self.frames_per_window:
            raise DataError(
                f"window holds {arr.shape[0]} frames, expected {self.frames_per_window}"
            )
        if arr.shape[1] != self.axis.num_bins:
            raise DataError(
                f"frames have {arr.shape[1]} bins but the axis has {self.axis.num_bins}"
            )
        object.__setattr__(self, "amplitudes", arr)

    @classmethod
    def from_frames(cls, frames: Sequence[Frame], axis: RangeAxis) -> "ClassificationWindow":
        if not frames:
            raise DataError("a window needs at least one frame")
        lengths = {len(f) for f in frames}
        if lengths != {axis.num_bins}:
            raise DataError(f"frame lengths {sorted(lengths)} do not match axis ({axis.num_bins})")
        return cls(np.stack([f.amplitudes for f in frames]), axis, len(frames))

    @property
    def frames(self) -> tuple[Frame, ...]:
        return tuple(Frame(row) for row in self.amplitudes)

    def __eq__(self, other):
        if not isinstance(other, ClassificationWindow):
            return NotImplemented
        return (
            self.axis == other.axis
            and self.frames_per_window == other.frames_per_window
            and np.array_equal(self.amplitudes, other.amplitudes)
        )

    __hash__ = None


FEATURE_NAMES: tuple[str, ...] = (
    "main_peak_mean",
    "secondary_peak_mean",
    "peak_amplitude_ratio",
    "main_peak_variance",
    "secondary_peak_variance",
    "peak_variance_ratio",
)
NUM_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    main_peak_mean: float
    secondary_peak_mean: float
    peak_amplitude_ratio: float
    main_peak_variance: float
    secondary_peak_variance: float
    peak_variance_ratio: float

    def __post_init__(self):
        for name in FEATURE_NAMES:
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise DataError(f"feature {name} must be finite and non-negative, got {v}")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "FeatureVector":
        values = list(values)
        if len(values) != NUM_FEATURES:
            raise DataError(f"expected {NUM_FEATURES} feature values, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature rows with labels, optional container ids and provenance.

    ``groups`` identifies the physical container a window came from (-1 for
    scenes without one); it drives the per-container split mode.
    """

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray | None = None
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] != NUM_FEATURES:
            raise DataError(f"features must be an (n, {NUM_FEATURES}) array, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DataError("labels must have one entry per feature row")
        if y.size and (y.min() < 0 or y.max() >= NUM_CLASSES):
            raise InvalidCodeError("dataset contains labels outside 0..4")
        if not np.all(np.isfinite(x)):
            raise DataError("dataset contains non-finite features")
        g = None
        if self.groups is not None:
            g = np.array(self.groups, dtype=np.int64)
            if g.shape != y.shape:
                raise DataError("groups must have one entry per feature row")
            g.setflags(write=False)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "groups", g)
        object.__setattr__(self, "provenance", dict(self.provenance))

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_records(
        cls,
        records: Iterable[tuple[FeatureVector, MaterialClass]],
        provenance: Mapping[str, Any] | None = None,
    ) -> "Dataset":
        records = list(records)
        x = np.array([fv.as_array() for fv, _ in records]).reshape(-1, NUM_FEATURES)
        y = np.array([class_code(c) for _, c in records], dtype=np.int64)
        return cls(x, y, provenance=provenance or {})

    @property
    def records(self) -> list[tuple[FeatureVector, MaterialClass]]:
        return [
            (FeatureVector.from_array(row), code_class(int(c)))
            for row, c in zip(self.features, self.labels)
        ]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=NUM_CLASSES)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        groups = None if self.groups is None else self.groups[idx]
        return Dataset(self.features[idx], self.labels[idx], groups, self.provenance)
