"""Dense softmax classifier trained from scratch with NumPy.

Architecture (defaults): normalization -> 50 relu -> dropout -> 40 relu ->
dropout -> 10 relu -> 5 softmax, trained with class-weighted cross-entropy
and Adam on mini-batches.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .domain import CLASS_LABELS, NUM_CLASSES, Dataset, FeatureVector, MaterialClass, code_class
from .errors import ConfigError, DataError, DegenerateTrainingError, EmptyDatasetError, NumericError, SchemaError

MODEL_FORMAT = "radarsort-model"
MODEL_VERSION = 1

STD_FLOOR = 1e-8
LOG_GUARD = 1e-12
ACTIVATIONS = ("relu", "softmax", "none")

# SeedSequence spawn keys for the independent random streams used by fit().
_INIT_STREAM, _SHUFFLE_STREAM, _DROPOUT_STREAM = 0, 1, 2


def _as_batch(x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        std = np.array(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise DataError("normalizer mean and std must be equal-length vectors")
        if not np.all(std > 0):
            raise DataError("normalizer std must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def transform(self, x) -> np.ndarray:
        return (_as_batch(x) - self.mean) / self.std


def fit_normalizer(train_features) -> Normalizer:
    """Per-feature mean and population std over the training rows, std floored."""
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("fitting a normalizer needs at least 2 training records")
    # shift by the first row so a constant column gets exactly its value as mean
    d = x - x[0]
    dm = d.mean(axis=0)
    std = np.sqrt(((d - dm) ** 2).mean(axis=0))
    return Normalizer(x[0] + dm, np.maximum(std, STD_FLOOR))


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        self.biases = np.array(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DataError(
                f"dense layer shapes inconsistent: weights {self.weights.shape}, biases {self.biases.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise DataError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise DataError("dense layer parameters must be finite")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass(eq=False)
class MlpModel:
    normalizer: Normalizer
    layers: list[DenseLayer]
    dropout_rate: float = 0.1
    # Indices of layers whose activations are followed by dropout.
    dropout_after: tuple[int, ...] = (0, 1)
    class_order: tuple[str, ...] = CLASS_LABELS

    def __post_init__(self):
        if not self.layers:
            raise DataError("model needs at least one layer")
        if len(self.normalizer.mean) != self.layers[0].n_in:
            raise DataError("normalizer width does not match the first layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DataError(f"layer chain broken: {a.n_out} outputs feed {b.n_in} inputs")
        if self.layers[-1].n_out != len(self.class_order):
            raise DataError("output width must equal the number of classes")
        if self.layers[-1].activation != "softmax":
            raise DataError("the output layer must use softmax")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataError("dropout rate must lie in [0, 1)")
        self.dropout_after = tuple(int(i) for i in self.dropout_after)
        self.class_order = tuple(self.class_order)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        """(in, out) per dense layer."""
        return [(layer.n_in, layer.n_out) for layer in self.layers]

    def parameter_count(self) -> int:
        return sum(layer.weights.size + layer.biases.size for layer in self.layers)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.biases))
        return out

    def copy(self) -> "MlpModel":
        layers = [DenseLayer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers]
        return replace(self, layers=layers)


def init_model(
    normalizer: Normalizer,
    rng: np.random.Generator,
    hidden: Sequence[int] = (50, 40, 10),
    n_classes: int = NUM_CLASSES,
    dropout_rate: float = 0.1,
    dropout_after: Sequence[int] = (0, 1),
) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    sizes = [len(normalizer.mean), *hidden, n_classes]
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        act = "softmax" if i == len(sizes) - 2 else "relu"
        layers.append(DenseLayer(w, np.zeros(n_out), act))
    class_order = CLASS_LABELS if n_classes == NUM_CLASSES else tuple(str(i) for i in range(n_classes))
    return MlpModel(normalizer, layers, dropout_rate, tuple(dropout_after), class_order)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


@dataclass
class ForwardPass:
    """Output probabilities plus what backward() needs."""

    probs: np.ndarray
    inputs: list[np.ndarray]  # input to each dense layer
    pre_activations: list[np.ndarray]
    masks: list[np.ndarray | None]  # scaled dropout mask applied after each layer


def forward(
    model: MlpModel,
    x,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
    dropout: bool = True,
) -> ForwardPass:
    """Run the network on one feature vector or a batch of rows.

    In ``"train"`` mode inverted dropout is applied after the configured layers
    (needs ``rng`` unless ``dropout`` is False); ``"infer"`` is deterministic.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    use_dropout = mode == "train" and dropout and model.dropout_rate > 0
    if use_dropout and rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = 1.0 - model.dropout_rate
    a = model.normalizer.transform(x)
    if not np.all(np.isfinite(a)):
        raise NumericError("normalization")
    inputs, pre, masks = [], [], []
    for i, layer in enumerate(model.layers):
        inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        if not np.all(np.isfinite(z)):
            raise NumericError(f"dense_{i}")
        pre.append(z)
        if layer.activation == "relu":
            a = relu(z)
        elif layer.activation == "softmax":
            a = softmax(z)
        else:
            a = z
        mask = None
        if use_dropout and i in model.dropout_after:
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        masks.append(mask)
    if not np.all(np.isfinite(a)):
        raise NumericError(f"dense_{len(model.layers) - 1}")
    return ForwardPass(a, inputs, pre, masks)


def class_weights(label_counts) -> np.ndarray:
    """Inverse-frequency weights N / (K_present * N_c); absent classes get 0."""
    counts = np.asarray(label_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise DataError("label counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise EmptyDatasetError("cannot weight classes of an empty dataset")
    present = counts > 0
    w = np.zeros_like(counts)
    w[present] = total / (present.sum() * counts[present])
    return w


def weighted_cross_entropy(probs, label, weights) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    c = int(label)
    return float(-weights[c] * np.log(probs[c] + LOG_GUARD))


def batch_loss(probs: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    """Mean over the batch of per-sample weighted cross-entropy."""
    p = probs[np.arange(len(labels)), labels]
    return float(np.mean(-weights[labels] * np.log(p + LOG_GUARD)))


def backward(
    model: MlpModel, fp: ForwardPass, labels, weights
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of :func:`batch_loss` w.r.t. every (weights, biases) pair.

    Reuses the dropout masks recorded in ``fp``. The normalizer is frozen.
    """
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    weights = np.asarray(weights, dtype=np.float64)
    probs = fp.probs
    n = probs.shape[0]
    if labels.shape != (n,) or len(fp.inputs) != len(model.layers):
        raise DataError("backward: cached activations do not match labels or model")
    rows = np.arange(n)
    p_true = probs[rows, labels]
    # d/dz of -w*log(p_y + guard) = w * p_y/(p_y + guard) * (p - onehot)
    scale = weights[labels] * p_true / (p_true + LOG_GUARD) / n
    delta = probs.copy()
    delta[rows, labels] -= 1.0
    delta *= scale[:, None]

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if i < len(model.layers) - 1:
            # delta currently holds dL/d(output of layer i), after dropout
            if fp.masks[i] is not None:
                delta = delta * fp.masks[i]
            if layer.activation == "relu":
                delta = delta * (fp.pre_activations[i] > 0)
            elif layer.activation == "softmax":
                raise DataError("softmax is only supported on the output layer")
        elif fp.masks[i] is not None:
            raise DataError("dropout on the output layer is not supported")
        grads[i] = (delta.T @ fp.inputs[i], delta.sum(axis=0))
        if i > 0:
            delta = delta @ layer.weights
    return grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    test_fraction: float = 0.30
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-7
    seed: int = 0
    use_class_weights: bool = True
    hidden_sizes: tuple[int, ...] = (50, 40, 10)
    dropout_rate: float = 0.1
    # "stratified" (default), "shuffled" (plain) or "container" (split by physical container)
    split_mode: str = "stratified"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        self.validate()

    def validate(self) -> None:
        for name in ("epochs", "batch_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.adam_eps > 0):
            raise ConfigError("invalid Adam hyperparameters")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if any(h < 1 for h in self.hidden_sizes):
            raise ConfigError("hidden layer sizes must be >= 1")
        if self.split_mode not in ("stratified", "shuffled", "container"):
            raise ConfigError(f"unknown split_mode {self.split_mode!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "test_fraction": self.test_fraction,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
            "use_class_weights": self.use_class_weights,
            "hidden_sizes": list(self.hidden_sizes),
            "dropout_rate": self.dropout_rate,
            "split_mode": self.split_mode,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown training settings: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class Adam:
    def __init__(self, params: list[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-7):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        """Update the parameter arrays in place."""
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(eq=False)
class FitResult:
    model: MlpModel
    losses: list[float]
    train_index: np.ndarray
    test_index: np.ndarray
    class_weights: np.ndarray
    config: TrainConfig = field(default_factory=TrainConfig)


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))


def train_arrays(
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    n_classes: int = NUM_CLASSES,
) -> tuple[MlpModel, list[float], np.ndarray]:
    """Train on already-split arrays. Returns (model, per-epoch loss, class weights)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes)
    if np.count_nonzero(counts) < 2:
        raise DegenerateTrainingError("training needs at least two classes present")
    weights = class_weights(counts) if cfg.use_class_weights else np.ones(n_classes)

    model = init_model(
        fit_normalizer(x),
        _stream(cfg.seed, _INIT_STREAM),
        cfg.hidden_sizes,
        n_classes,
        cfg.dropout_rate,
        dropout_after=tuple(range(min(2, len(cfg.hidden_sizes)))),
    )
    shuffle_rng = _stream(cfg.seed, _SHUFFLE_STREAM)
    dropout_rng = _stream(cfg.seed, _DROPOUT_STREAM)
    opt = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)

    n = len(y)
    losses = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            fp = forward(model, x[idx], "train", dropout_rng)
            total += batch_loss(fp.probs, y[idx], weights) * len(idx)
            grads = backward(model, fp, y[idx], weights)
            opt.step([g for pair in grads for g in pair])
        losses.append(total / n)
    return model, losses, weights


def fit(dataset: Dataset, cfg: TrainConfig = TrainConfig()) -> FitResult:
    """Split, normalize on the train part, and train the default network."""
    from .evaluation import train_test_split

    if len(dataset) < 2:
        raise EmptyDatasetError("training needs at least 2 records")
    if np.count_nonzero(dataset.class_counts()) < 2:
        raise DegenerateTrainingError("dataset holds a single class; nothing to separate")
    groups = dataset.groups if cfg.split_mode == "container" else None
    if cfg.split_mode == "container" and groups is None:
        raise ConfigError("container split needs per-window container ids")
    train_idx, test_idx = train_test_split(
        dataset.labels,
        cfg.test_fraction,
        cfg.seed,
        stratify=cfg.split_mode != "shuffled",
        groups=groups,
    )
    model, losses, weights = train_arrays(
        dataset.features[train_idx], dataset.labels[train_idx], cfg
    )
    return FitResult(model, losses, train_idx, test_idx, weights, cfg)


def predict_proba(model: MlpModel, x) -> np.ndarray:
    return forward(model, x, "infer").probs


def predict(model: MlpModel, features) -> tuple[MaterialClass, np.ndarray]:
    """Most probable class for one feature vector (ties -> lowest code) and the probabilities."""
    probs = predict_proba(model, features)[0]
    return code_class(int(np.argmax(probs))), probs


def predict_labels(model: MlpModel, x) -> np.ndarray:
    return np.argmax(predict_proba(model, x), axis=1)


def model_to_dict(model: MlpModel, train_config: TrainConfig | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "class_order": list(model.class_order),
        "normalizer": {
            "mean": model.normalizer.mean.tolist(),
            "std": model.normalizer.std.tolist(),
        },
        "layers": [
            {
                "in": layer.n_in,
                "out": layer.n_out,
                "activation": layer.activation,
                "weights": layer.weights.ravel(order="C").tolist(),
                "biases": layer.biases.tolist(),
            }
            for layer in model.layers
        ],
        "dropout_rate": model.dropout_rate,
        "dropout_after": list(model.dropout_after),
    }
    if train_config is not None:
        doc["train_config"] = train_config.to_dict()
        doc["train_config_digest"] = train_config.digest()
    return doc


def model_from_dict(doc: Mapping[str, Any]) -> MlpModel:
    if doc.get("format") != MODEL_FORMAT:
        raise SchemaError(f"not a model document (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise SchemaError(
            f"model format version {doc.get('version')!r} unsupported (expected {MODEL_VERSION})"
        )
    try:
        norm = Normalizer(doc["normalizer"]["mean"], doc["normalizer"]["std"])
        layers = []
        for spec in doc["layers"]:
            w = np.array(spec["weights"], dtype=np.float64).reshape(spec["out"], spec["in"])
            layers.append(DenseLayer(w, spec["biases"], spec["activation"]))
        return MlpModel(
            norm,
            layers,
            float(doc["dropout_rate"]),
            tuple(doc.get("dropout_after", (0, 1))),
            tuple(doc["class_order"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed model document: {e}") from None


def dumps_model(model: MlpModel, train_config: TrainConfig | None = None, extra: Mapping[str, Any] | None = None) -> str:
    doc = model_to_dict(model, train_config)
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=1) + "\n"


def loads_model(text: str) -> tuple[MlpModel, dict[str, Any]]:
    """Parse a model document; returns the model and the raw document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"model file is not valid JSON: {e}") from None
    return model_from_dict(doc), doc
