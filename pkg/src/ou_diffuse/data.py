"""Tabular data: CSV I/O, standardization, splitting, augmentation."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

PROVENANCE_COLUMN = "is_synthetic"


class DataError(ValueError):
    pass


@dataclass
class SampleMatrix:
    """Rows of real features plus an optional integer label per row.

    ``provenance`` (if set) flags rows that were generated rather than
    observed; it is carried through CSV as the ``is_synthetic`` column.
    """

    features: np.ndarray
    columns: list[str]
    labels: np.ndarray | None = None
    label_name: str | None = None
    provenance: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {self.features.shape}")
        if len(self.columns) != self.features.shape[1]:
            raise DataError(f"{len(self.columns)} column names for {self.features.shape[1]} features")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        m = self.features.shape[0]
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (m,):
                raise DataError(f"labels shape {self.labels.shape} != ({m},)")
        if self.provenance is not None:
            self.provenance = np.asarray(self.provenance, dtype=bool)
            if self.provenance.shape != (m,):
                raise DataError(f"provenance shape {self.provenance.shape} != ({m},)")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n_rows

    def take(self, idx) -> "SampleMatrix":
        return SampleMatrix(
            self.features[idx],
            list(self.columns),
            None if self.labels is None else self.labels[idx],
            self.label_name,
            None if self.provenance is None else self.provenance[idx],
        )

    def select_class(self, label: int) -> "SampleMatrix":
        if self.labels is None:
            raise DataError("data has no label column")
        return self.take(np.flatnonzero(self.labels == label))


def _parse_float(cell: str, line: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"line {line}: non-numeric value {cell!r} in column {col!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {line}: non-finite value {cell!r} in column {col!r}")
    return v


def _looks_numeric(row) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True


def load_csv(path, label_column: str | None = None,
             provenance_column: str | None = PROVENANCE_COLUMN) -> SampleMatrix:
    """Read a headed numeric CSV.

    ``label_column`` names an integer column to split off as labels. A column
    named ``provenance_column`` (if present) becomes the provenance flags.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if _looks_numeric(header):
        raise DataError(f"{path}: missing header row (first line is numeric)")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if label_column is not None and label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header {header}")

    width = len(header)
    values = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != width:
            raise DataError(f"{path}: line {line} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            values[i, j] = _parse_float(cell.strip(), line, header[j])

    label_idx = header.index(label_column) if label_column is not None else None
    prov_idx = header.index(provenance_column) if provenance_column in header else None
    feat_idx = [j for j in range(width) if j not in (label_idx, prov_idx)]

    labels = None
    if label_idx is not None:
        col = values[:, label_idx]
        if np.any(col != np.round(col)):
            bad = int(np.flatnonzero(col != np.round(col))[0]) + 2
            raise DataError(f"{path}: line {bad}: label {col[bad - 2]!r} is not an integer")
        labels = col.astype(np.int64)
    provenance = None
    if prov_idx is not None:
        provenance = values[:, prov_idx] != 0
    return SampleMatrix(values[:, feat_idx], [header[j] for j in feat_idx],
                        labels, label_column, provenance)


def _fmt(v: float) -> str:
    return repr(float(v))


def atomic_write_text(path, text: str):
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    return "\n".join(lines) + "\n"


def write_csv(data: SampleMatrix, path):
    header = list(data.columns)
    cols = [data.features[:, j] for j in range(data.dim)]
    fmts = [_fmt] * data.dim
    if data.labels is not None:
        header.append(data.label_name or "label")
        cols.append(data.labels)
        fmts.append(lambda v: str(int(v)))
    if data.provenance is not None:
        header.append(PROVENANCE_COLUMN)
        cols.append(data.provenance)
        fmts.append(lambda v: "1" if v else "0")
    lines = [",".join(header)]
    for i in range(data.n_rows):
        lines.append(",".join(f(c[i]) for f, c in zip(fmts, cols)))
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DataError("scaler mean/std must be matching 1-d arrays")
        if np.any(self.std <= 0) or not np.all(np.isfinite(self.std)):
            raise DataError("scaler std must be positive and finite")

    @classmethod
    def identity(cls, dim: int, columns=None) -> "Scaler":
        return cls(np.zeros(dim), np.ones(dim), list(columns or []))

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "columns": list(self.columns)}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64),
                   list(d.get("columns", [])))


def _features(data):
    return data.features if isinstance(data, SampleMatrix) else np.asarray(data, dtype=np.float64)


def fit_scaler(data) -> Scaler:
    x = _features(data)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("need at least 2 rows to fit a scaler")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    const = np.flatnonzero(~(std > 0))
    if const.size:
        names = data.columns if isinstance(data, SampleMatrix) else [str(j) for j in range(x.shape[1])]
        raise DataError(f"constant feature(s) cannot be standardized: {[names[j] for j in const]}")
    cols = list(data.columns) if isinstance(data, SampleMatrix) else []
    return Scaler(mean, std, cols)


def _rescaled(data, values):
    if isinstance(data, SampleMatrix):
        return replace(data, features=values)
    return values


def apply_scaler(data, s: Scaler):
    x = _features(data)
    if x.shape[-1] != s.dim:
        raise DataError(f"scaler has {s.dim} features, data has {x.shape[-1]}")
    return _rescaled(data, (x - s.mean) / s.std)


def invert_scaler(data, s: Scaler):
    x = _features(data)
    if x.shape[-1] != s.dim:
        raise DataError(f"scaler has {s.dim} features, data has {x.shape[-1]}")
    return _rescaled(data, x * s.std + s.mean)


def _n_test(n: int, fraction: float) -> int:
    return int(math.floor(fraction * n + 0.5))


def split(data: SampleMatrix, test_fraction: float, seed: int,
          stratify_by_label: bool = True) -> tuple[SampleMatrix, SampleMatrix]:
    """Random train/test split; rows keep their original order in each part.

    With stratification each label class contributes
    ``round(test_fraction * class_size)`` rows to the test part.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.Generator(np.random.Philox(seed))
    m = data.n_rows
    if stratify_by_label:
        if data.labels is None:
            raise DataError("stratified split needs labels")
        test_idx = []
        for label in np.unique(data.labels):
            members = np.flatnonzero(data.labels == label)
            k = _n_test(members.size, test_fraction)
            test_idx.append(rng.permutation(members)[:k])
        test_idx = np.concatenate(test_idx)
    else:
        test_idx = rng.permutation(m)[:_n_test(m, test_fraction)]
    if test_idx.size == 0 or test_idx.size == m:
        raise DataError(f"split of {m} rows at {test_fraction} leaves an empty part")
    mask = np.zeros(m, dtype=bool)
    mask[test_idx] = True
    return data.take(np.flatnonzero(~mask)), data.take(np.flatnonzero(mask))


def augment(train: SampleMatrix, synthetic: SampleMatrix, label_value: int) -> SampleMatrix:
    """Append synthetic rows (labelled ``label_value``) to the training part."""
    if list(train.columns) != list(synthetic.columns):
        raise DataError(f"schema mismatch: {train.columns} vs {synthetic.columns}")
    if train.labels is None:
        raise DataError("training data has no labels; cannot label synthetic rows")
    n_train, n_syn = train.n_rows, synthetic.n_rows
    labels = np.concatenate([train.labels, np.full(n_syn, int(label_value), dtype=np.int64)])
    prov_train = train.provenance if train.provenance is not None else np.zeros(n_train, dtype=bool)
    return SampleMatrix(
        np.concatenate([train.features, synthetic.features], axis=0),
        list(train.columns),
        labels,
        train.label_name,
        np.concatenate([prov_train, np.ones(n_syn, dtype=bool)]),
    )
