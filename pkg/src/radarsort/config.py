"""Pipeline configuration: one JSON document with a section per stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .classifier import TrainConfig
from .domain import CLASS_ORDER
from .errors import ConfigError
from .features import FeatureParams
from .simulator import SimConfig, normalize_counts

DEFAULT_WINDOWS_PER_CLASS = 400

DEFAULT_PATHS = {
    "windows": "windows.jsonl",
    "features": "features.csv",
    "model": "model.json",
    "report": "report.json",
}


@dataclass(frozen=True)
class PipelineConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    counts: Mapping[Any, int] = field(
        default_factory=lambda: {m: DEFAULT_WINDOWS_PER_CLASS for m in CLASS_ORDER}
    )
    features: FeatureParams = field(default_factory=FeatureParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_PATHS))

    def __post_init__(self):
        object.__setattr__(self, "counts", normalize_counts(self.counts))
        unknown = set(self.paths) - set(DEFAULT_PATHS)
        if unknown:
            raise ConfigError(f"unknown path keys: {sorted(unknown)}")
        object.__setattr__(self, "paths", {**DEFAULT_PATHS, **self.paths})
        if sum(self.counts.values()) == 0:
            raise ConfigError("simulator counts request no windows at all")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PipelineConfig":
        doc = dict(doc)
        unknown = set(doc) - {"simulator", "features", "training", "evaluation", "paths"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        sim_doc = dict(doc.get("simulator", {}))
        counts = sim_doc.pop("counts", None)
        if isinstance(counts, int):
            counts = {m: counts for m in CLASS_ORDER}
        train_doc = dict(doc.get("training", {}))
        eval_doc = dict(doc.get("evaluation", {}))
        bad = set(eval_doc) - {"split_mode", "test_fraction"}
        if bad:
            raise ConfigError(f"unknown evaluation settings: {sorted(bad)}")
        for key, value in eval_doc.items():
            if key in train_doc and train_doc[key] != value:
                raise ConfigError(f"training.{key} and evaluation.{key} disagree")
            train_doc[key] = value
        try:
            kwargs: dict[str, Any] = {
                "sim": SimConfig.from_dict(sim_doc),
                "features": FeatureParams.from_dict(doc.get("features", {})),
                "train": TrainConfig.from_dict(train_doc),
                "paths": dict(doc.get("paths", {})),
            }
        except TypeError as e:
            raise ConfigError(str(e)) from None
        if counts is not None:
            kwargs["counts"] = counts
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: config is not valid JSON ({e.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        train = self.train.to_dict()
        evaluation = {k: train.pop(k) for k in ("split_mode", "test_fraction")}
        return {
            "simulator": {
                **self.sim.to_dict(),
                "counts": {m.label: n for m, n in self.counts.items()},
            },
            "features": self.features.to_dict(),
            "training": train,
            "evaluation": evaluation,
            "paths": dict(self.paths),
        }

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, sim=replace(self.sim, seed=seed), train=replace(self.train, seed=seed))
