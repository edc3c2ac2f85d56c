"""File ingestion and report serialisation.

CSV reading is strict: ragged rows and non-numeric cells fail with the file
line and column in the message rather than silently dropping data.  Reports
serialise deterministically; floats are written with 17 significant digits,
which round-trips the binary value exactly, and files land atomically via a
rename so readers never observe a half-written report.
"""
from __future__ import annotations

import csv
import gzip
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from io import StringIO

import numpy as np

from .core import ValidationError

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows plus optional integer labels."""

    features: np.ndarray
    labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def read_csv(path, has_header: bool = False, label_column=None) -> LabeledDataset:
    """Load a numeric CSV, optionally splitting off a 0/1 label column.

    label_column may be a 0-based position or, when has_header is set, a
    column name.  Labels must be integral zeros and ones; every other cell
    must parse as a float.  Rows whose width differs from the first data row
    are rejected.
    """
    if isinstance(label_column, str) and not has_header:
        raise ValidationError("selecting the label column by name requires a header row")
    header = None
    cells: list = []
    lines: list = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if has_header and header is None:
                header = [c.strip() for c in row]
                continue
            cells.append([c.strip() for c in row])
            lines.append(reader.line_num)
    if not cells:
        raise ValidationError(f"{path}: no data rows")
    width = len(cells[0])
    for row, line in zip(cells, lines):
        if len(row) != width:
            raise ValidationError(
                f"{path}: row at line {line} has {len(row)} fields, expected {width}"
            )
    if header is not None and len(header) != width:
        raise ValidationError(
            f"{path}: header has {len(header)} fields, data rows have {width}"
        )

    label_index = None
    if label_column is not None:
        if isinstance(label_column, str):
            if label_column not in header:
                raise ValidationError(
                    f"{path}: no column named {label_column!r}; have {header}"
                )
            label_index = header.index(label_column)
        else:
            label_index = int(label_column)
            if not 0 <= label_index < width:
                raise ValidationError(
                    f"{path}: label column {label_index} out of range for width {width}"
                )
        if width < 2:
            raise ValidationError(f"{path}: no feature columns besides the label")

    values = np.empty((len(cells), width))
    for i, (row, line) in enumerate(zip(cells, lines)):
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: non-numeric value {cell!r} at line {line}, column {j + 1}"
                ) from None

    if label_index is None:
        return LabeledDataset(features=values)
    raw = values[:, label_index]
    if not np.all(np.isin(raw, (0.0, 1.0))):
        bad = int(np.flatnonzero(~np.isin(raw, (0.0, 1.0)))[0])
        raise ValidationError(
            f"{path}: label column must contain only 0 and 1; "
            f"row at line {lines[bad]} has {raw[bad]!r}"
        )
    features = np.delete(values, label_index, axis=1)
    return LabeledDataset(features=features, labels=raw.astype(np.int64))


def _open_binary(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(handle, count: int, path, what: str) -> bytes:
    data = handle.read(count)
    if len(data) != count:
        raise ValidationError(f"{path}: file ends before the {what}")
    return data


def read_idx(images_path, labels_path=None, keep_classes=None, limit=None) -> LabeledDataset:
    """Load big-endian idx image (and optional label) files, gzipped or not.

    Pixels are flattened row-major and scaled to [0, 1].  keep_classes
    restricts rows to the listed labels, then limit keeps the first rows in
    file order.
    """
    if keep_classes is not None and labels_path is None:
        raise ValidationError("filtering by class requires a label file")
    with _open_binary(images_path) as handle:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(handle, 16, images_path, "image header"))
        if magic != IMAGES_MAGIC:
            raise ValidationError(
                f"{images_path}: bad magic {magic}, expected {IMAGES_MAGIC} for image data"
            )
        raw = _read_exact(handle, count * rows * cols, images_path, "pixel data")
    features = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    features = features.reshape(count, rows * cols)

    labels = None
    if labels_path is not None:
        with _open_binary(labels_path) as handle:
            magic, label_count = struct.unpack(">II", _read_exact(handle, 8, labels_path, "label header"))
            if magic != LABELS_MAGIC:
                raise ValidationError(
                    f"{labels_path}: bad magic {magic}, expected {LABELS_MAGIC} for label data"
                )
            raw = _read_exact(handle, label_count, labels_path, "label data")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
        if label_count != count:
            raise ValidationError(
                f"label file has {label_count} entries, image file has {count}"
            )

    if keep_classes is not None:
        wanted = np.isin(labels, np.asarray(list(keep_classes)))
        features = features[wanted]
        labels = labels[wanted]
    if limit is not None:
        if limit < 0:
            raise ValidationError("limit must be >= 0")
        features = features[:limit]
        if labels is not None:
            labels = labels[:limit]
    return LabeledDataset(features=features, labels=labels)


def format_float(value: float) -> str:
    """17 significant digits: enough to reconstruct the exact float64."""
    return format(float(value), ".17g")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, str):
        return value
    raise ValidationError(f"cannot serialise a cell of type {type(value).__name__}")


@dataclass(eq=False)
class ReportTable:
    name: str
    columns: tuple
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if not self.name or not all(c.isalnum() or c in "_-" for c in self.name):
            raise ValidationError(
                f"table name {self.name!r} must be non-empty alphanumeric/underscore/dash"
            )
        self.columns = tuple(str(c) for c in self.columns)
        if not self.columns:
            raise ValidationError(f"table {self.name!r} needs at least one column")

    def append(self, *cells) -> None:
        if len(cells) != len(self.columns):
            raise ValidationError(
                f"table {self.name!r} expects {len(self.columns)} cells, got {len(cells)}"
            )
        self.rows.append(tuple(cells))


@dataclass(eq=False)
class ExperimentReport:
    """Named tables plus the configuration that produced them.

    The configuration must record the seed; without it a report cannot be
    reproduced and comparisons across runs are meaningless.
    """

    name: str
    config: dict
    tables: list = field(default_factory=list)

    def __post_init__(self):
        if "seed" not in self.config:
            raise ValidationError("report config must include the seed")
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate table names in report: {names}")

    def table(self, name: str) -> ReportTable:
        for t in self.tables:
            if t.name == name:
                return t
        raise ValidationError(f"report has no table named {name!r}")


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    handle, temp = tempfile.mkstemp(dir=directory, prefix=".report-")
    try:
        with os.fdopen(handle, "w", newline="") as out:
            out.write(text)
        os.replace(temp, path)
    except BaseException:
        if os.path.exists(temp):
            os.unlink(temp)
        raise


def table_to_csv(table: ReportTable) -> str:
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format_cell(c) for c in row])
    return buffer.getvalue()


def _json_text(value, pieces: list, level: int) -> None:
    pad = "  " * (level + 1)
    if value is None:
        pieces.append("null")
    elif isinstance(value, (bool, np.bool_)):
        pieces.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        pieces.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise ValidationError("json reports cannot hold non-finite numbers")
        pieces.append(format_float(value))
    elif isinstance(value, str):
        pieces.append(json.dumps(value))
    elif isinstance(value, dict):
        if not value:
            pieces.append("{}")
            return
        pieces.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            if not isinstance(key, str):
                raise ValidationError("json object keys must be strings")
            pieces.append(pad + json.dumps(key) + ": ")
            _json_text(item, pieces, level + 1)
            pieces.append(",\n" if i + 1 < len(value) else "\n")
        pieces.append("  " * level + "}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        items = list(value)
        if not items:
            pieces.append("[]")
            return
        pieces.append("[\n")
        for i, item in enumerate(items):
            pieces.append(pad)
            _json_text(item, pieces, level + 1)
            pieces.append(",\n" if i + 1 < len(items) else "\n")
        pieces.append("  " * level + "]")
    else:
        raise ValidationError(f"cannot serialise a value of type {type(value).__name__}")


def report_to_json(report: ExperimentReport) -> str:
    payload = {
        "name": report.name,
        "config": report.config,
        "tables": [
            {"name": t.name, "columns": list(t.columns), "rows": [list(r) for r in t.rows]}
            for t in report.tables
        ],
    }
    pieces: list = []
    _json_text(payload, pieces, 0)
    pieces.append("\n")
    return "".join(pieces)


def write_report(report: ExperimentReport, path, fmt: str = "csv") -> list:
    """Serialise the report and return the paths written.

    csv: the first table lands at the given path and each further table at a
    sibling file with the table name spliced in before the extension.
    json: everything, config included, lands in the one file.
    """
    if not report.tables:
        raise ValidationError("report has no tables to write")
    path = str(path)
    if fmt == "json":
        _atomic_write_text(path, report_to_json(report))
        return [path]
    if fmt != "csv":
        raise ValidationError(f"unknown report format {fmt!r}")
    base, ext = os.path.splitext(path)
    if not ext:
        ext = ".csv"
    written = []
    for i, table in enumerate(report.tables):
        target = path if i == 0 else f"{base}.{table.name}{ext}"
        _atomic_write_text(target, table_to_csv(table))
        written.append(target)
    return written
