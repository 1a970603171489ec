"""Dense matrix / labeled dataset model and on-disk formats.

Samples are stored as columns throughout the package: a data matrix has
shape ``(d, n)`` with ``d`` features and ``n`` samples. Class ids are
1-based.

Two matrix formats are supported:

``csv``
    first line ``rows,cols``, then one line per row of comma separated
    numbers written with 17 significant digits.
``rawbin``
    magic ``RBDSMAT0``, little-endian u64 rows, u64 cols, then
    ``rows * cols`` little-endian float64 values in row-major order.

Labels live in a sidecar text file with one integer per line.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"RBDSMAT0"
FORMATS = ("csv", "rawbin")


class MatrixFormatError(ValueError):
    """Raised when a matrix or label file cannot be parsed."""


def check_matrix(m, name="matrix"):
    """Validate and return ``m`` as a 2-D finite float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledDataset:
    """Column samples with 1-based class labels.

    ``class_count`` defaults to the largest label. Every class id in
    ``1..class_count`` must occur at least once.
    """

    data: np.ndarray
    labels: np.ndarray
    class_count: int = 0

    def __post_init__(self):
        data = check_matrix(self.data, "data")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != data.shape[1]:
            raise ValueError(
                f"need one label per column: {labels.shape[0] if labels.ndim == 1 else labels.shape} "
                f"labels for {data.shape[1]} columns"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
        C = int(self.class_count) or int(labels.max())
        if labels.min() < 1 or labels.max() > C:
            raise ValueError(f"labels must lie in 1..{C}")
        missing = sorted(set(range(1, C + 1)) - set(labels.tolist()))
        if missing:
            raise ValueError(f"classes without samples: {missing}")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "class_count", C)

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def class_sizes(self):
        return np.bincount(self.labels, minlength=self.class_count + 1)[1:]

    def subset(self, idx):
        """Dataset restricted to the given column indices (same class count)."""
        idx = np.asarray(idx)
        return LabeledDataset(self.data[:, idx], self.labels[idx], self.class_count)


def one_hot(ds):
    """Label matrix ``H`` of shape ``(C, n)`` with ``H[labels[j]-1, j] = 1``."""
    H = np.zeros((ds.class_count, ds.n_samples))
    H[ds.labels - 1, np.arange(ds.n_samples)] = 1.0
    return H


def normalize_columns(X):
    """Scale every column to unit Euclidean length; all-zero columns stay zero."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=0)
    return X / np.where(norms > 0, norms, 1.0)


def _check_format(fmt):
    if fmt not in FORMATS:
        raise ValueError(f"unknown matrix format {fmt!r}; expected one of {FORMATS}")


def guess_format(path):
    return "rawbin" if str(path).endswith((".bin", ".rawbin")) else "csv"


def save_matrix(m, path, format="csv"):
    _check_format(format)
    a = check_matrix(m)
    path = Path(path)
    try:
        if format == "csv":
            lines = [f"{a.shape[0]},{a.shape[1]}"]
            lines += [",".join(f"{v:.17g}" for v in row) for row in a]
            _atomic_write(path, ("\n".join(lines) + "\n").encode())
        else:
            header = MAGIC + struct.pack("<QQ", *a.shape)
            _atomic_write(path, header + a.astype("<f8").tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write matrix to {path}: {exc}") from exc


def load_matrix(path, format="csv"):
    _check_format(format)
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read matrix from {path}: {exc}") from exc
    a = _parse_csv(raw, path) if format == "csv" else _parse_rawbin(raw, path)
    if not np.all(np.isfinite(a)):
        r, c = np.argwhere(~np.isfinite(a))[0]
        raise ValueError(f"{path}: non-finite value at row {r + 1}, column {c + 1}")
    return a


def _parse_csv(raw, path):
    lines = raw.decode("utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixFormatError(f"{path}: empty file")
    try:
        rows, cols = (int(t) for t in lines[0].split(","))
    except ValueError:
        raise MatrixFormatError(f"{path}: header must be 'rows,cols', got {lines[0]!r}") from None
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"{path}: invalid shape {rows}x{cols}")
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"{path}: header says {rows} rows, found {len(body)}")
    a = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise MatrixFormatError(f"{path}: row {i + 1} has {len(fields)} columns, expected {cols}")
        for j, tok in enumerate(fields):
            try:
                a[i, j] = float(tok)
            except ValueError:
                raise MatrixFormatError(f"{path}: bad number {tok!r} at row {i + 1}, column {j + 1}") from None
    return a


def _parse_rawbin(raw, path):
    if len(raw) < 24 or raw[:8] != MAGIC:
        raise MatrixFormatError(f"{path}: missing RBDSMAT0 header")
    rows, cols = struct.unpack("<QQ", raw[8:24])
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"{path}: invalid shape {rows}x{cols}")
    if len(raw) != 24 + 8 * rows * cols:
        raise MatrixFormatError(f"{path}: expected {rows * cols} values, payload has {(len(raw) - 24) / 8:g}")
    return np.frombuffer(raw, dtype="<f8", offset=24).reshape(rows, cols).astype(np.float64)


def save_labels(labels, path):
    labels = np.asarray(labels)
    _atomic_write(Path(path), "".join(f"{int(v)}\n" for v in labels).encode())


def load_labels(path):
    path = Path(path)
    out = []
    for i, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise MatrixFormatError(f"{path}: line {i + 1} is not an integer: {line!r}") from None
    if not out:
        raise MatrixFormatError(f"{path}: empty label file")
    return np.array(out, dtype=np.int64)


def load_dataset(data_path, labels_path, format=None):
    fmt = format or guess_format(data_path)
    return LabeledDataset(load_matrix(data_path, fmt), load_labels(labels_path))


def save_dataset(ds, data_path, labels_path, format=None):
    save_matrix(ds.data, data_path, format or guess_format(data_path))
    save_labels(ds.labels, labels_path)


def _atomic_write(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
