"""Peak-statistic features of a classification window.

The main peak is the front-wall reflection, the secondary peak the back-wall
reflection further out. Both are located once on the window-mean sweep; the
per-frame amplitudes at those two fixed bins give the means and variances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

import numpy as np

from .domain import ClassificationWindow, Dataset, FeatureVector
from .errors import ConfigError, DataError, DetectionError

DEFAULT_GUARD_BINS = 3
RATIO_EPS = 1e-6
RATIO_CLAMP = 1e3


@dataclass(frozen=True)
class FeatureParams:
    guard_bins: int = DEFAULT_GUARD_BINS
    eps: float = RATIO_EPS
    ratio_clamp: float = RATIO_CLAMP

    def __post_init__(self):
        if int(self.guard_bins) != self.guard_bins or self.guard_bins < 0:
            raise ConfigError("guard_bins must be a non-negative integer")
        if not self.eps > 0:
            raise ConfigError("eps must be > 0")
        if not self.ratio_clamp > 0:
            raise ConfigError("ratio_clamp must be > 0")

    def to_dict(self) -> dict[str, Any]:
        return {"guard_bins": self.guard_bins, "eps": self.eps, "ratio_clamp": self.ratio_clamp}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FeatureParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown feature settings: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class PeakLocations:
    main_bin: int
    secondary_bin: int
    guard_bins: int = DEFAULT_GUARD_BINS

    def __post_init__(self):
        if self.main_bin < 0:
            raise DetectionError("main_bin must be a valid bin index")
        if not self.secondary_bin > self.main_bin + self.guard_bins:
            raise DetectionError(
                f"secondary bin {self.secondary_bin} must lie beyond main bin "
                f"{self.main_bin} + guard {self.guard_bins}"
            )


def _shifted_stats(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and unbiased variance, computed relative to the first row.

    The shift makes both exact for constant columns.
    """
    d = a - a[0]
    dm = d.mean(axis=0)
    var = ((d - dm) ** 2).sum(axis=0) / (a.shape[0] - 1) if a.shape[0] > 1 else np.full(a.shape[1:], np.nan)
    return a[0] + dm, var


def mean_sweep(window: ClassificationWindow) -> np.ndarray:
    """Per-bin mean amplitude over the window's frames."""
    return _shifted_stats(window.amplitudes)[0]


def detect_peaks(mean: np.ndarray, guard_bins: int = DEFAULT_GUARD_BINS) -> PeakLocations:
    """Locate main and secondary peaks in a per-bin sweep.

    The main peak is the largest value among bins that still leave at least one
    bin beyond the guard interval; the secondary is the largest value strictly
    past ``main + guard_bins``. Ties go to the lowest index in both searches.
    """
    mean = np.asarray(mean, dtype=np.float64)
    if mean.ndim != 1:
        raise DataError("peak detection expects a one-dimensional sweep")
    if len(mean) < guard_bins + 2:
        raise DetectionError(
            f"sweep of {len(mean)} bins leaves no room beyond a {guard_bins}-bin guard"
        )
    main = int(np.argmax(mean[: len(mean) - guard_bins - 1]))
    start = main + guard_bins + 1
    secondary = start + int(np.argmax(mean[start:]))
    return PeakLocations(main, secondary, guard_bins)


@dataclass(frozen=True)
class PeakStatistics:
    """Unclamped per-peak statistics, before they become a FeatureVector."""

    peaks: PeakLocations
    main_mean: float
    secondary_mean: float
    main_variance: float
    secondary_variance: float
    amplitude_ratio: float
    variance_ratio: float


def peak_statistics(
    window: ClassificationWindow, params: FeatureParams = FeatureParams()
) -> PeakStatistics:
    amps = window.amplitudes
    if amps.shape[0] < 2:
        raise DataError("variance is undefined for a window with fewer than 2 frames")
    peaks = detect_peaks(mean_sweep(window), params.guard_bins)
    means, variances = _shifted_stats(amps[:, [peaks.main_bin, peaks.secondary_bin]])
    main_mean, sec_mean = float(means[0]), float(means[1])
    main_var, sec_var = float(variances[0]), float(variances[1])
    return PeakStatistics(
        peaks=peaks,
        main_mean=main_mean,
        secondary_mean=sec_mean,
        main_variance=main_var,
        secondary_variance=sec_var,
        amplitude_ratio=main_mean / (sec_mean + params.eps),
        variance_ratio=main_var / (sec_var + params.eps),
    )


def _clamp(x: float, hi: float) -> float:
    return min(max(x, 0.0), hi)


def extract_features(
    window: ClassificationWindow, params: FeatureParams = FeatureParams()
) -> FeatureVector:
    s = peak_statistics(window, params)
    return FeatureVector(
        main_peak_mean=s.main_mean,
        secondary_peak_mean=s.secondary_mean,
        peak_amplitude_ratio=_clamp(s.amplitude_ratio, params.ratio_clamp),
        main_peak_variance=s.main_variance,
        secondary_peak_variance=s.secondary_variance,
        peak_variance_ratio=_clamp(s.variance_ratio, params.ratio_clamp),
    )


def extract_dataset(
    windows: Iterable[ClassificationWindow],
    labels: Iterable[int],
    groups: Iterable[int] | None = None,
    params: FeatureParams = FeatureParams(),
    provenance: Mapping[str, Any] | None = None,
) -> Dataset:
    rows = [extract_features(w, params).as_array() for w in windows]
    x = np.array(rows, dtype=np.float64).reshape(-1, 6)
    return Dataset(
        x,
        np.fromiter(labels, dtype=np.int64),
        None if groups is None else np.fromiter(groups, dtype=np.int64),
        provenance or {},
    )
