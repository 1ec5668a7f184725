"""On-disk formats: windows (JSON lines), features (CSV), models and reports (JSON).

Every file carries a format name and version; readers refuse anything else.
Floats are written with Python's shortest round-trip repr, so reading a file
back reproduces the in-memory values exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from .domain import FEATURE_NAMES, ClassificationWindow, Dataset, MaterialClass, RangeAxis
from .errors import DataError, SchemaError

WINDOWS_FORMAT = "radarsort-windows"
FEATURES_FORMAT = "radarsort-features"
FORMAT_VERSION = 1

_FEATURE_HEADER = ["index", "label", "container", *FEATURE_NAMES]


def _dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"))


@dataclass(frozen=True, eq=False)
class WindowFile:
    windows: list[ClassificationWindow]
    labels: np.ndarray
    containers: np.ndarray
    header: dict[str, Any]

    def __len__(self):
        return len(self.windows)


def write_windows(path, windows, labels, containers, provenance: Mapping[str, Any]) -> None:
    """Header line, then one record per window."""
    windows = list(windows)
    if not windows:
        raise DataError("refusing to write an empty windows file")
    axis = windows[0].axis
    fpw = windows[0].frames_per_window
    header = {
        "format": WINDOWS_FORMAT,
        "version": FORMAT_VERSION,
        "axis": axis.to_dict(),
        "frames_per_window": fpw,
        "count": len(windows),
        "provenance": dict(provenance),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for i, (w, label, container) in enumerate(zip(windows, labels, containers)):
            if w.axis != axis or w.frames_per_window != fpw:
                raise DataError(f"window {i} does not share the file's axis/frame count")
            rec = {
                "index": i,
                "label": MaterialClass(int(label)).label,
                "container": int(container),
                "frames": w.amplitudes.tolist(),
            }
            fh.write(_dumps(rec) + "\n")


def _check_header(doc: Any, fmt: str, where: str) -> None:
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise SchemaError(f"{where}: not a {fmt} file")
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaError(
            f"{where}: {fmt} format version {doc.get('version')!r} unsupported "
            f"(expected {FORMAT_VERSION})"
        )


def iter_windows(path) -> Iterator[tuple[dict[str, Any], int, ClassificationWindow, int, int]]:
    """Yield (header, line number, window, label code, container) for each record."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}:1: header is not valid JSON ({e.msg})") from None
        _check_header(header, WINDOWS_FORMAT, f"{path}:1")
        try:
            axis = RangeAxis.from_dict(header["axis"])
            fpw = int(header["frames_per_window"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}:1: malformed header ({e})") from None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                label = MaterialClass.from_label(rec["label"])
                container = int(rec.get("container", -1))
                window = ClassificationWindow(np.asarray(rec["frames"], dtype=np.float64), axis, fpw)
            except json.JSONDecodeError as e:
                raise SchemaError(f"{path}:{lineno}: record is not valid JSON ({e.msg})") from None
            except (KeyError, TypeError, ValueError) as e:
                idx = rec.get("index", "?") if isinstance(rec, dict) else "?"
                raise SchemaError(f"{path}:{lineno}: bad window record {idx}: {e}") from None
            yield header, lineno, window, int(label), container


def read_windows(path) -> WindowFile:
    windows, labels, containers = [], [], []
    header: dict[str, Any] = {}
    for header, _, w, label, container in iter_windows(path):
        windows.append(w)
        labels.append(label)
        containers.append(container)
    if not windows:
        raise SchemaError(f"{path}: contains no window records")
    return WindowFile(windows, np.array(labels, dtype=np.int64), np.array(containers, dtype=np.int64), header)


def dataset_digest(ds: Dataset) -> str:
    """Content hash of feature values and labels (row order included)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    return h.hexdigest()


def write_features(path, ds: Dataset) -> None:
    """CSV with a one-line ``#`` metadata preamble followed by a header row."""
    meta = {"format": FEATURES_FORMAT, "version": FORMAT_VERSION, "provenance": dict(ds.provenance)}
    buf = io.StringIO()
    buf.write("# " + _dumps(meta) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_FEATURE_HEADER)
    groups = ds.groups if ds.groups is not None else np.full(len(ds), -1)
    for i, (row, label, g) in enumerate(zip(ds.features, ds.labels, groups)):
        writer.writerow([i, MaterialClass(int(label)).label, int(g), *(repr(float(v)) for v in row)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_features(path) -> Dataset:
    path = str(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise SchemaError(f"{path}:1: missing '# ' metadata line")
        try:
            meta = json.loads(first[2:])
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}:1: metadata is not valid JSON ({e.msg})") from None
        _check_header(meta, FEATURES_FORMAT, f"{path}:1")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _FEATURE_HEADER:
            raise SchemaError(
                f"{path}:2: expected columns {','.join(_FEATURE_HEADER)}, got {header}"
            )
        x, y, g = [], [], []
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(_FEATURE_HEADER):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(_FEATURE_HEADER)} fields, got {len(row)}"
                )
            try:
                y.append(int(MaterialClass.from_label(row[1])))
                g.append(int(row[2]))
                vals = [float(v) for v in row[3:]]
            except (ValueError, DataError) as e:
                raise SchemaError(f"{path}:{lineno}: {e}") from None
            if not all(np.isfinite(vals)) or min(vals) < 0:
                raise SchemaError(f"{path}:{lineno}: features must be finite and non-negative")
            x.append(vals)
    if not x:
        raise SchemaError(f"{path}: contains no feature rows")
    return Dataset(np.array(x), np.array(y), np.array(g), meta.get("provenance", {}))


def write_json(path, doc: Any) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}:{e.lineno}: not valid JSON ({e.msg})") from None
