"""Container material classification from 60 GHz radar range sweeps.

Pipeline: simulated windows -> peak-statistic features -> dense classifier ->
confusion-matrix evaluation.
"""

from .classifier import MlpModel, TrainConfig, fit, predict
from .domain import (
    ClassificationWindow,
    Dataset,
    FeatureVector,
    Frame,
    MaterialClass,
    RangeAxis,
    bin_for_distance,
    class_code,
    code_class,
)
from .evaluation import ConfusionMatrix, confusion_matrix, report, train_test_split
from .features import extract_dataset, extract_features
from .simulator import SimConfig, generate_dataset, simulate_window

__all__ = [
    "ClassificationWindow",
    "ConfusionMatrix",
    "Dataset",
    "FeatureVector",
    "Frame",
    "MaterialClass",
    "MlpModel",
    "RangeAxis",
    "SimConfig",
    "TrainConfig",
    "bin_for_distance",
    "class_code",
    "code_class",
    "confusion_matrix",
    "extract_dataset",
    "extract_features",
    "fit",
    "generate_dataset",
    "predict",
    "report",
    "simulate_window",
    "train_test_split",
]
