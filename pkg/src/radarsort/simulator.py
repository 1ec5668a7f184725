"""Synthetic stand-in for the rotating-disc radar rig.

A container on the disc shows up as two reflections in the range sweep: the
front wall at ``standoff - radius`` and, for materials that let part of the
pulse through, the back wall at ``standoff + radius``. Rotating the container
modulates both reflections with a container-specific low-order cosine series,
which is what gives the per-peak variances something to measure.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .domain import (
    CLASS_ORDER,
    DEFAULT_FRAMES_PER_WINDOW,
    ClassificationWindow,
    Frame,
    MaterialClass,
    RangeAxis,
    bin_for_distance,
    class_code,
)
from .errors import ConfigError, EmptyDatasetError, GeometryError, InvalidMaterialError, RangeAxisError

NUM_HARMONICS = 3

# Stream tags for SeedSequence spawn keys; keep container draws and window
# noise on disjoint streams.
_CONTAINER_STREAM = 0
_WINDOW_STREAM = 1

Harmonics = tuple[tuple[float, float], ...]  # (weight, phase) pairs, weights sum to 1


@dataclass(frozen=True)
class MaterialProfile:
    """Distributions a material's containers are drawn from."""

    front_amp_range: tuple[float, float]
    back_to_front_ratio_range: tuple[float, float]
    front_var_scale: float = 1.0
    back_var_scale: float = 1.0
    overall_scale: float = 1.0
    radius_range_mm: tuple[float, float] = (25.0, 45.0)

    def __post_init__(self):
        for name in ("front_amp_range", "back_to_front_ratio_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ConfigError(f"{name} must satisfy 0 <= low <= high <= 1, got ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))
        for name in ("front_var_scale", "back_var_scale", "overall_scale"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        lo, hi = self.radius_range_mm
        if not 10.0 <= lo <= hi <= 60.0:
            raise ConfigError(f"radius_range_mm must lie within [10, 60], got ({lo}, {hi})")
        object.__setattr__(self, "radius_range_mm", (float(lo), float(hi)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "front_amp_range": list(self.front_amp_range),
            "back_to_front_ratio_range": list(self.back_to_front_ratio_range),
            "front_var_scale": self.front_var_scale,
            "back_var_scale": self.back_var_scale,
            "overall_scale": self.overall_scale,
            "radius_range_mm": list(self.radius_range_mm),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MaterialProfile":
        d = dict(d)
        for key in ("front_amp_range", "back_to_front_ratio_range", "radius_range_mm"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


DEFAULT_PROFILES: dict[MaterialClass, MaterialProfile] = {
    # Conductive: everything reflects off the front wall.
    MaterialClass.METAL: MaterialProfile((0.70, 0.95), (0.0, 0.0), radius_range_mm=(30.0, 40.0)),
    # Back wall nearly as strong as the front.
    MaterialClass.PLASTIC: MaterialProfile((0.35, 0.60), (0.60, 0.95), radius_range_mm=(25.0, 50.0)),
    # Wider spread of peak ratios and stronger rotation dependence.
    MaterialClass.GLASS: MaterialProfile(
        (0.30, 0.70), (0.20, 0.90), front_var_scale=2.0, back_var_scale=2.0, radius_range_mm=(25.0, 45.0)
    ),
    # Two peaks like plastic/glass, but weaker overall.
    MaterialClass.PAPER: MaterialProfile(
        (0.10, 0.30), (0.30, 0.80), overall_scale=0.5, radius_range_mm=(30.0, 45.0)
    ),
}

DEFAULT_MODULATION_DEPTH: dict[MaterialClass, float] = {
    MaterialClass.METAL: 0.05,
    MaterialClass.PLASTIC: 0.15,
    MaterialClass.GLASS: 0.20,
    MaterialClass.PAPER: 0.15,
}


def _material_map(d: Mapping[Any, Any]) -> dict[MaterialClass, Any]:
    out = {}
    for k, v in d.items():
        out[MaterialClass.from_label(k) if isinstance(k, str) else MaterialClass(k)] = v
    return out


@dataclass(frozen=True)
class SimConfig:
    axis: RangeAxis = field(default_factory=RangeAxis)
    frames_per_window: int = DEFAULT_FRAMES_PER_WINDOW
    standoff_mm: float = 250.0
    noise_sigma: float = 0.01
    pulse_width_bins: float = 2.0
    # Pulses are truncated beyond this many bins from their centre so that a
    # noise-free metal sweep is exactly zero past the detection guard.
    pulse_support_bins: int = 3
    angular_modulation_depth: Mapping[MaterialClass, float] = field(
        default_factory=lambda: dict(DEFAULT_MODULATION_DEPTH)
    )
    profiles: Mapping[MaterialClass, MaterialProfile] = field(
        default_factory=lambda: dict(DEFAULT_PROFILES)
    )
    # Per-container scale on the rotation modulation (label seams, ridges, dents).
    shape_factor_range: tuple[float, float] = (0.3, 1.0)
    # Relative spread of front/back reflectivity between revolutions of the
    # same container (it is re-seated on the disc each time).
    revolution_jitter: float = 0.1
    windows_per_container: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "angular_modulation_depth", _material_map(self.angular_modulation_depth))
        object.__setattr__(self, "profiles", _material_map(self.profiles))
        self.validate()

    def validate(self) -> None:
        if int(self.frames_per_window) != self.frames_per_window or self.frames_per_window < 2:
            raise ConfigError("frames_per_window must be an integer >= 2 (variance needs two samples)")
        if not self.noise_sigma >= 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not self.pulse_width_bins > 0:
            raise ConfigError("pulse_width_bins must be > 0")
        if self.pulse_support_bins < 0:
            raise ConfigError("pulse_support_bins must be >= 0")
        lo, hi = self.shape_factor_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError("shape_factor_range must satisfy 0 <= low <= high <= 1")
        object.__setattr__(self, "shape_factor_range", (float(lo), float(hi)))
        if not self.revolution_jitter >= 0:
            raise ConfigError("revolution_jitter must be >= 0")
        if self.windows_per_container < 1:
            raise ConfigError("windows_per_container must be >= 1")
        for m in CLASS_ORDER[:-1]:
            if m not in self.profiles:
                raise ConfigError(f"missing material profile for {m.label}")
            depth = self.angular_modulation_depth.get(m, 0.0)
            prof = self.profiles[m]
            if depth < 0 or depth * max(prof.front_var_scale, prof.back_var_scale) > 1:
                raise ConfigError(
                    f"modulation depth for {m.label} must keep amplitudes non-negative "
                    "(0 <= depth * var_scale <= 1)"
                )
            try:
                bin_for_distance(self.axis, self.standoff_mm - prof.radius_range_mm[1])
                bin_for_distance(self.axis, self.standoff_mm + prof.radius_range_mm[1])
            except RangeAxisError as e:
                raise ConfigError(f"{m.label} containers do not fit the range axis: {e}") from None
        if self.profiles[MaterialClass.METAL].back_to_front_ratio_range != (0.0, 0.0):
            raise ConfigError("metal profile must have no back reflection (ratio range (0, 0))")

    def to_dict(self) -> dict[str, Any]:
        return {
            "axis": self.axis.to_dict(),
            "frames_per_window": self.frames_per_window,
            "standoff_mm": self.standoff_mm,
            "noise_sigma": self.noise_sigma,
            "pulse_width_bins": self.pulse_width_bins,
            "pulse_support_bins": self.pulse_support_bins,
            "angular_modulation_depth": {
                m.label: self.angular_modulation_depth[m] for m in sorted(self.angular_modulation_depth)
            },
            "profiles": {m.label: self.profiles[m].to_dict() for m in sorted(self.profiles)},
            "shape_factor_range": list(self.shape_factor_range),
            "revolution_jitter": self.revolution_jitter,
            "windows_per_container": self.windows_per_container,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimConfig":
        d = dict(d)
        if "axis" in d:
            d["axis"] = RangeAxis.from_dict(d["axis"])
        if "shape_factor_range" in d:
            d["shape_factor_range"] = tuple(d["shape_factor_range"])
        if "angular_modulation_depth" in d:
            depth = dict(DEFAULT_MODULATION_DEPTH)
            depth.update(_material_map(d["angular_modulation_depth"]))
            d["angular_modulation_depth"] = depth
        if "profiles" in d:
            profiles = dict(DEFAULT_PROFILES)
            for m, p in _material_map(d["profiles"]).items():
                base = profiles.get(m)
                merged = base.to_dict() if base else {}
                merged.update(p)
                profiles[m] = MaterialProfile.from_dict(merged)
            d["profiles"] = profiles
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown simulator settings: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ContainerSpec:
    material: MaterialClass
    radius_mm: float
    front_reflectivity: float
    back_reflectivity: float
    front_harmonics: Harmonics = ()
    back_harmonics: Harmonics = ()
    shape_factor: float = 1.0

    def __post_init__(self):
        if self.material == MaterialClass.EMPTY:
            raise InvalidMaterialError("a container cannot be of class empty")
        if not 10.0 <= self.radius_mm <= 60.0:
            raise GeometryError(f"container radius {self.radius_mm} mm outside [10, 60]")
        for name in ("front_reflectivity", "back_reflectivity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidMaterialError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.shape_factor <= 1.0:
            raise InvalidMaterialError(f"shape_factor must lie in [0, 1], got {self.shape_factor}")

    def positions_mm(self, standoff_mm: float) -> tuple[float, float]:
        return standoff_mm - self.radius_mm, standoff_mm + self.radius_mm


def _draw_harmonics(rng: np.random.Generator) -> Harmonics:
    weights = rng.uniform(0.2, 1.0, NUM_HARMONICS)
    weights /= weights.sum()
    phases = rng.uniform(0.0, 2 * math.pi, NUM_HARMONICS)
    return tuple((float(w), float(p)) for w, p in zip(weights, phases))


def sample_container(
    material: MaterialClass, rng: np.random.Generator, cfg: SimConfig | None = None
) -> ContainerSpec:
    """Draw one physical container of ``material`` from its profile.

    Front reflectivity is the uniform draw times the profile's overall scale;
    the back reflectivity is the front times a uniform back/front ratio.
    """
    material = MaterialClass(material)
    if material == MaterialClass.EMPTY:
        raise InvalidMaterialError("cannot sample a container for the empty class")
    cfg = cfg or SimConfig()
    prof = cfg.profiles[material]
    radius = rng.uniform(*prof.radius_range_mm)
    front = rng.uniform(*prof.front_amp_range) * prof.overall_scale
    ratio = rng.uniform(*prof.back_to_front_ratio_range)
    front_h = _draw_harmonics(rng)
    back_h = _draw_harmonics(rng)
    shape = rng.uniform(*cfg.shape_factor_range)
    return ContainerSpec(
        material=material,
        radius_mm=float(radius),
        front_reflectivity=float(min(front, 1.0)),
        back_reflectivity=float(min(front * ratio, 1.0)),
        front_harmonics=front_h,
        back_harmonics=back_h,
        shape_factor=float(shape),
    )


def reseat_container(spec: ContainerSpec, cfg: SimConfig, rng: np.random.Generator) -> ContainerSpec:
    """The same container as seen on one revolution.

    Front and back reflectivities are jittered independently, then the back is
    held inside the profile's back/front ratio band: the back echo crosses the
    front wall twice and never outgrows it.
    """
    if cfg.revolution_jitter == 0:
        return spec
    gain = 1.0 + cfg.revolution_jitter * rng.normal(size=2)
    front = float(np.clip(spec.front_reflectivity * gain[0], 0.0, 1.0))
    lo, hi = cfg.profiles[spec.material].back_to_front_ratio_range
    back = float(np.clip(spec.back_reflectivity * gain[1], lo * front, hi * front))
    return replace(spec, front_reflectivity=front, back_reflectivity=back)


def _cos_series(harmonics: Harmonics, angle: float) -> float:
    return sum(w * math.cos((k + 1) * angle + p) for k, (w, p) in enumerate(harmonics))


def _pulse(cfg: SimConfig, center: int) -> np.ndarray:
    i = np.arange(cfg.axis.num_bins)
    offset = i - center
    shape = np.exp(-0.5 * (offset / cfg.pulse_width_bins) ** 2)
    shape[np.abs(offset) > cfg.pulse_support_bins] = 0.0
    return shape


def peak_bins(spec: ContainerSpec, cfg: SimConfig) -> tuple[int, int]:
    """Bins of the front and back reflections; raises GeometryError if off-axis."""
    front_mm, back_mm = spec.positions_mm(cfg.standoff_mm)
    try:
        return bin_for_distance(cfg.axis, front_mm), bin_for_distance(cfg.axis, back_mm)
    except RangeAxisError as e:
        raise GeometryError(f"container reflections fall outside the range axis: {e}") from None


def _noise(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    return np.abs(rng.normal(0.0, 1.0, cfg.axis.num_bins)) * cfg.noise_sigma


def simulate_frame(
    spec: ContainerSpec, angle: float, cfg: SimConfig, rng: np.random.Generator
) -> Frame:
    front_bin, back_bin = peak_bins(spec, cfg)
    prof = cfg.profiles[spec.material]
    depth = cfg.angular_modulation_depth.get(spec.material, 0.0) * spec.shape_factor
    front_h = spec.front_reflectivity * (
        1.0 + depth * prof.front_var_scale * _cos_series(spec.front_harmonics, angle)
    )
    back_h = spec.back_reflectivity * (
        1.0 + depth * prof.back_var_scale * _cos_series(spec.back_harmonics, angle)
    )
    amps = front_h * _pulse(cfg, front_bin) + back_h * _pulse(cfg, back_bin) + _noise(cfg, rng)
    return Frame(np.clip(amps, 0.0, 1.0))


def simulate_window(
    spec: ContainerSpec | MaterialClass | None, cfg: SimConfig, rng: np.random.Generator
) -> ClassificationWindow:
    """One revolution: frames at angles 2*pi*k/N. ``None`` or EMPTY gives a noise-only scene."""
    n = cfg.frames_per_window
    angles = 2 * math.pi * np.arange(n) / n
    if spec is None or (isinstance(spec, MaterialClass) and spec == MaterialClass.EMPTY):
        rows = [np.clip(_noise(cfg, rng), 0.0, 1.0) for _ in range(n)]
    elif isinstance(spec, ContainerSpec):
        rows = [simulate_frame(spec, float(a), cfg, rng).amplitudes for a in angles]
    else:
        raise InvalidMaterialError(f"expected a ContainerSpec or EMPTY, got {spec!r}")
    return ClassificationWindow(np.stack(rows), cfg.axis, n)


def _rng(seed: int, material: MaterialClass, stream: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(class_code(material), stream, index))
    return np.random.default_rng(ss)


def container_for(material: MaterialClass, container_index: int, cfg: SimConfig) -> ContainerSpec:
    return sample_container(material, _rng(cfg.seed, material, _CONTAINER_STREAM, container_index), cfg)


def generate_window(material: MaterialClass, index: int, cfg: SimConfig) -> tuple[ClassificationWindow, int]:
    """Window ``index`` of ``material`` and its container id, independent of generation order.

    Every empty scene counts as its own container.
    """
    material = MaterialClass(material)
    rng = _rng(cfg.seed, material, _WINDOW_STREAM, index)
    if material == MaterialClass.EMPTY:
        return simulate_window(None, cfg, rng), index
    container = index // cfg.windows_per_container
    spec = reseat_container(container_for(material, container, cfg), cfg, rng)
    return simulate_window(spec, cfg, rng), container


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Generated windows with labels, container ids and provenance."""

    windows: tuple[ClassificationWindow, ...]
    labels: np.ndarray
    containers: np.ndarray
    provenance: Mapping[str, Any]

    def __len__(self):
        return len(self.windows)


def normalize_counts(per_class_counts: Mapping[Any, int]) -> dict[MaterialClass, int]:
    counts = {m: 0 for m in CLASS_ORDER}
    for m, n in _material_map(per_class_counts).items():
        if int(n) != n or n < 0:
            raise ConfigError(f"count for {m.label} must be a non-negative integer, got {n}")
        counts[m] = int(n)
    return counts


def generate_dataset(per_class_counts: Mapping[Any, int], cfg: SimConfig) -> WindowSet:
    counts = normalize_counts(per_class_counts)
    if sum(counts.values()) == 0:
        raise EmptyDatasetError("no windows requested: every class count is zero")
    windows, labels, containers = [], [], []
    for m in CLASS_ORDER:
        for j in range(counts[m]):
            w, c = generate_window(m, j, cfg)
            windows.append(w)
            labels.append(class_code(m))
            containers.append(c)
    provenance = {
        "seed": cfg.seed,
        "sim_config_digest": cfg.digest(),
        "per_class_counts": {m.label: counts[m] for m in CLASS_ORDER},
    }
    return WindowSet(tuple(windows), np.array(labels, dtype=np.int64), np.array(containers, dtype=np.int64), provenance)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=seed)
