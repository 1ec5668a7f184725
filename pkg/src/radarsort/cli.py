"""Command-line entry point: generate, extract, train, eval, predict, demo."""

from __future__ import annotations

import argparse
import hashlib
import sys
import tempfile
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import files
from .classifier import dumps_model, fit, loads_model, predict_labels, predict_proba
from .config import PipelineConfig
from .domain import CLASS_LABELS, MaterialClass
from .errors import ConfigError, DataError, RadarSortError, SchemaError
from .evaluation import confusion_matrix, report
from .features import extract_dataset
from .simulator import generate_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_GATE = 3

ACCEPTANCE_ACCURACY = 0.95


class StageError(RadarSortError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Console:
    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def info(self, msg: str = "") -> None:
        if not self.quiet:
            print(msg)


# ---------------------------------------------------------------- pipeline steps


def run_generate(cfg: PipelineConfig, out, console=_Console()) -> files.WindowFile:
    for m, n in cfg.counts.items():
        if n == 0:
            console.info(f"warning: count 0 for {m.label}; class absent from the dataset")
    ws = generate_dataset(cfg.counts, cfg.sim)
    provenance = {**ws.provenance, "sim_config": cfg.sim.to_dict()}
    files.write_windows(out, ws.windows, ws.labels, ws.containers, provenance)
    counts = np.bincount(ws.labels, minlength=len(CLASS_LABELS))
    for name, n in zip(CLASS_LABELS, counts):
        console.info(f"{name:8s} {n:6d} windows")
    console.info(f"wrote {len(ws)} windows to {out}")
    return files.WindowFile(list(ws.windows), ws.labels, ws.containers, provenance)


def run_extract(cfg: PipelineConfig, windows_path, out, console=_Console()):
    wf = files.read_windows(windows_path)
    prov = wf.header.get("provenance", {})
    provenance = {
        "seed": prov.get("seed"),
        "sim_config_digest": prov.get("sim_config_digest"),
        "feature_params": cfg.features.to_dict(),
    }
    ds = extract_dataset(wf.windows, wf.labels, wf.containers, cfg.features, provenance)
    files.write_features(out, ds)
    console.info(f"wrote {len(ds)} feature rows to {out}")
    return ds


def _accuracy(model, ds, idx) -> float:
    if len(idx) == 0:
        return float("nan")
    pred = predict_labels(model, ds.features[idx])
    return float(np.mean(pred == ds.labels[idx]))


def run_train(cfg: PipelineConfig, features_path, out, console=_Console()):
    ds = files.read_features(features_path)
    result = fit(ds, cfg.train)
    train_acc = _accuracy(result.model, ds, result.train_index)
    test_acc = _accuracy(result.model, ds, result.test_index)
    extra = {
        "feature_params": cfg.features.to_dict(),
        "split": {
            "mode": cfg.train.split_mode,
            "test_fraction": cfg.train.test_fraction,
            "seed": cfg.train.seed,
            "features_digest": files.dataset_digest(ds),
            "train_index": result.train_index.tolist(),
            "test_index": result.test_index.tolist(),
        },
        "class_weights": result.class_weights.tolist(),
        "losses": result.losses,
        "metrics": {"train_accuracy": train_acc, "test_accuracy": test_acc},
    }
    Path(out).write_text(dumps_model(result.model, cfg.train, extra), encoding="utf-8")
    losses = result.losses
    marks = sorted({0, *range(9, len(losses), 10), len(losses) - 1})
    console.info("epoch  loss")
    for i in marks:
        console.info(f"{i + 1:5d}  {losses[i]:.6f}")
    console.info(f"train accuracy: {train_acc:.4f} ({len(result.train_index)} windows)")
    console.info(f"test accuracy:  {test_acc:.4f} ({len(result.test_index)} windows)")
    console.info(f"wrote model to {out}")
    return result, test_acc


def _load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read model {path}: {e.strerror}") from None
    model, doc = loads_model(text)
    if tuple(model.class_order) != CLASS_LABELS:
        raise SchemaError(
            f"model class order {list(model.class_order)} is incompatible with {list(CLASS_LABELS)}"
        )
    if model.layers[0].n_in != 6:
        raise SchemaError(f"model expects {model.layers[0].n_in} features, data has 6")
    return model, doc


def run_eval(model_path, features_path, out, subset: str = "auto", console=_Console()):
    model, doc = _load_model(model_path)
    ds = files.read_features(features_path)
    split = doc.get("split", {})
    matches = split.get("features_digest") == files.dataset_digest(ds)
    if subset == "auto":
        subset = "test" if matches else "all"
    if subset in ("test", "train"):
        if not matches:
            raise DataError(f"model records no {subset} split for this features file")
        idx = np.array(split[f"{subset}_index"], dtype=np.int64)
    else:
        idx = np.arange(len(ds))
    cm = confusion_matrix(ds.labels[idx], predict_labels(model, ds.features[idx]))
    rep = report(cm)
    Path(out).write_text(rep.to_json(), encoding="utf-8")
    console.info(f"evaluated {cm.total} windows ({subset})")
    console.info(rep.to_text().rstrip())
    console.info(f"wrote report to {out}")
    return rep


def format_prediction(probs: np.ndarray) -> str:
    label = MaterialClass(int(np.argmax(probs))).label
    return " ".join([label, *(f"{p:.6f}" for p in probs)])


def run_predict(model_path, windows_path, feature_params=None) -> list[str]:
    model, doc = _load_model(model_path)
    from .features import FeatureParams

    params = feature_params or FeatureParams.from_dict(doc.get("feature_params", {}))
    wf = files.read_windows(windows_path)
    ds = extract_dataset(wf.windows, wf.labels, wf.containers, params)
    return [format_prediction(p) for p in predict_proba(model, ds.features)]


def run_demo(cfg: PipelineConfig, workdir, console=_Console()):
    workdir = Path(workdir)
    p = {k: workdir / Path(v).name for k, v in cfg.paths.items()}
    stages = [
        ("generate", lambda: run_generate(cfg, p["windows"], console)),
        ("extract", lambda: run_extract(cfg, p["windows"], p["features"], console)),
        ("train", lambda: run_train(cfg, p["features"], p["model"], console)),
        ("eval", lambda: run_eval(p["model"], p["features"], p["report"], "test", console)),
    ]
    result = None
    for name, step in stages:
        console.info(f"== {name}")
        try:
            result = step()
        except RadarSortError as e:
            raise StageError(name, e) from e
        except OSError as e:
            raise StageError(name, DataError(str(e))) from e
    return result


# ---------------------------------------------------------------- argument handling


def _parse_counts(text: str) -> dict[str, int]:
    counts = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        try:
            counts[MaterialClass.from_label(name).label] = int(value)
        except (DataError, ValueError):
            raise argparse.ArgumentTypeError(f"bad count {part!r}; use e.g. metal=400,plastic=800")
    return counts


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="pipeline config (JSON)")
    common.add_argument("--seed", type=int, help="seed for simulation, splitting and training")
    common.add_argument("--out", metavar="PATH", help="output file")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = _Parser(prog="radarsort", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="simulate labelled classification windows")
    g.add_argument("--count", type=int, help="windows per class (all classes)")
    g.add_argument("--counts", type=_parse_counts, help="per-class counts, e.g. metal=400,plastic=800")

    e = sub.add_parser("extract", parents=[common], help="windows file -> features file")
    e.add_argument("windows", nargs="?")

    t = sub.add_parser("train", parents=[common], help="features file -> model file")
    t.add_argument("features", nargs="?")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--learning-rate", type=float)
    t.add_argument("--test-fraction", type=float)
    t.add_argument("--split-mode", choices=["stratified", "shuffled", "container"])
    t.add_argument("--no-class-weights", action="store_true")

    v = sub.add_parser("eval", parents=[common], help="model + features -> report")
    v.add_argument("model", nargs="?")
    v.add_argument("features", nargs="?")
    v.add_argument(
        "--subset",
        choices=["auto", "all", "test", "train"],
        default="auto",
        help="rows to evaluate; auto uses the model's recorded test split when the file matches",
    )

    p = sub.add_parser("predict", parents=[common], help="classify every window in a windows file")
    p.add_argument("model", nargs="?")
    p.add_argument("windows", nargs="?")

    d = sub.add_parser("demo", parents=[common], help="generate -> extract -> train -> eval")
    d.add_argument("--workdir", metavar="DIR", help="keep intermediate files here instead of a temp dir")
    return parser


def _config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "count", None) is not None:
        cfg = replace(cfg, counts={m: args.count for m in cfg.counts})
    if getattr(args, "counts", None):
        cfg = replace(cfg, counts={**{m.label: n for m, n in cfg.counts.items()}, **args.counts})
    overrides = {}
    for flag, key in (
        ("epochs", "epochs"),
        ("batch_size", "batch_size"),
        ("learning_rate", "learning_rate"),
        ("test_fraction", "test_fraction"),
        ("split_mode", "split_mode"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_class_weights", False):
        overrides["use_class_weights"] = False
    if overrides:
        cfg = replace(cfg, train=replace(cfg.train, **overrides))
    return cfg


def _dispatch(args) -> int:
    cfg = _config_from_args(args)
    console = _Console(args.quiet)
    paths = cfg.paths
    if args.command == "generate":
        run_generate(cfg, args.out or paths["windows"], console)
    elif args.command == "extract":
        run_extract(cfg, args.windows or paths["windows"], args.out or paths["features"], console)
    elif args.command == "train":
        run_train(cfg, args.features or paths["features"], args.out or paths["model"], console)
    elif args.command == "eval":
        run_eval(
            args.model or paths["model"],
            args.features or paths["features"],
            args.out or paths["report"],
            args.subset,
            console,
        )
    elif args.command == "predict":
        lines = run_predict(args.model or paths["model"], args.windows or paths["windows"], cfg.features)
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    elif args.command == "demo":
        if args.workdir:
            Path(args.workdir).mkdir(parents=True, exist_ok=True)
            rep = run_demo(cfg, args.workdir, console)
        else:
            with tempfile.TemporaryDirectory(prefix="radarsort-") as tmp:
                rep = run_demo(cfg, tmp, console)
        if args.out:
            Path(args.out).write_text(rep.to_json(), encoding="utf-8")
        digest = hashlib.sha256(rep.to_json().encode()).hexdigest()[:16]
        print(f"demo accuracy: {rep.accuracy:.4f} (report {digest})")
        if rep.accuracy < ACCEPTANCE_ACCURACY:
            print(f"FAIL: accuracy below {ACCEPTANCE_ACCURACY}", file=sys.stderr)
            return EXIT_GATE
        print("PASS")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return _dispatch(args)
    except ConfigError as e:
        print(f"radarsort {args.command}: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as e:
        code = EXIT_USAGE if isinstance(e.cause, ConfigError) else EXIT_DATA
        print(f"radarsort {args.command}: {e}", file=sys.stderr)
        return code
    except (DataError, OSError) as e:
        print(f"radarsort {args.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
