"""Synthetic data generation and dataset file formats.

Two on-disk formats are supported:

* dense binary: magic ``DDG1``, then little-endian u64 N, u64 M, one
  label-kind byte (1 = classification, 0 = regression), N*M row-major float64
  feature values, then N float64 labels;
* sparse text: one observation per line, ``<label> <index>:<value> ...`` with
  1-based feature indices in the file and 0-based indices in memory.

Both round-trip exactly: the dense path is bit-exact and the sparse path
re-serializes floats with shortest round-trip decimals.
"""

from __future__ import annotations

import struct
import warnings

import numpy as np
import scipy.sparse as sp

from .exceptions import LabelError, ParseError
from .grid import DataGrid

_MAGIC = b"DDG1"
_KIND_BYTE = {"classification": 1, "regression": 0}
_BYTE_KIND = {1: "classification", 0: "regression"}


def generate_synthetic(N: int, M: int, seed: int, flip_prob: float = 0.01) -> DataGrid:
    """Linearly separable-ish classification data with label noise.

    Features are drawn uniform on [-1, 1], labels are the sign of the margin
    against a hidden uniform weight vector (sign of an exact zero margin is
    taken as +1), each label is flipped independently with probability
    ``flip_prob``, and finally every column is scaled to unit population
    variance. Columns with zero variance are left unscaled with a warning.

    The draw order (features, hidden weights, flips) is fixed, so equal
    arguments produce an identical grid.
    """
    if N < 1 or M < 1:
        raise ValueError(f"need N >= 1 and M >= 1, got N={N}, M={M}")
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError(f"flip_prob must be in [0, 1], got {flip_prob}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(N, M))
    z = rng.uniform(-1.0, 1.0, size=M)
    y = np.where(X @ z >= 0.0, 1.0, -1.0)
    flips = rng.random(N) < flip_prob
    y[flips] *= -1.0

    # population variance: divide by N, not N-1
    var = X.var(axis=0)
    dead = var == 0.0
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} zero-variance feature columns left unscaled",
            RuntimeWarning,
            stacklevel=2,
        )
    scale = np.ones(M)
    np.sqrt(var, out=scale, where=~dead)
    X[:, ~dead] /= scale[~dead]
    return DataGrid(X, y)


def _infer_label_kind(y: np.ndarray) -> str:
    vals = np.unique(y)
    if np.isin(vals, (-1.0, 1.0)).all():
        return "classification"
    return "regression"


def _map_labels(y: np.ndarray, label_kind: str) -> np.ndarray:
    if label_kind == "regression":
        return y
    bad = ~np.isin(y, (-1.0, 0.0, 1.0))
    if bad.any():
        raise LabelError(
            f"classification labels must be in {{-1, 0, +1}}; found {y[bad][0]!r}"
        )
    # 0/1 convention maps onto -1/+1; -1/+1 pass through
    return np.where(y > 0.0, 1.0, -1.0)


def save_dataset(grid: DataGrid, path, format: str = "dense", label_kind: str | None = None):
    """Write a grid to ``path`` in the named format ("dense" or "sparse").

    ``label_kind`` defaults to classification when every label is -1 or +1.
    """
    if label_kind is None:
        label_kind = _infer_label_kind(grid.y)
    if label_kind not in _KIND_BYTE:
        raise ValueError(f"unknown label_kind {label_kind!r}")
    if format == "dense":
        X = grid.rows_cols(np.arange(grid.N), np.arange(grid.M))
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<QQB", grid.N, grid.M, _KIND_BYTE[label_kind]))
            fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(grid.y, dtype="<f8").tobytes())
    elif format == "sparse":
        Xc = grid.X.tocsr() if grid.storage_kind == "sparse" else sp.csr_matrix(grid.X)
        with open(path, "w") as fh:
            for j in range(grid.N):
                start, stop = Xc.indptr[j], Xc.indptr[j + 1]
                pairs = " ".join(
                    f"{idx + 1}:{float(val)!r}"
                    for idx, val in zip(Xc.indices[start:stop], Xc.data[start:stop])
                )
                line = f"{float(grid.y[j])!r}"
                fh.write(line + (" " + pairs if pairs else "") + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def load_dataset(
    path,
    format: str = "dense",
    n_features: int | None = None,
    label_kind: str | None = None,
) -> DataGrid:
    """Read a dataset written by save_dataset (or any file in those formats).

    For the sparse format ``n_features`` fixes M and makes out-of-range
    indices a ParseError; when omitted, M is the largest index seen. Labels
    are mapped to {-1, +1} in classification mode (the default for sparse
    files; dense files carry their own label-kind byte) and kept as raw reals
    in regression mode. An empty file yields a grid with N = 0, which the
    partitioning step rejects.
    """
    if format == "dense":
        return _load_dense(path, label_kind)
    if format == "sparse":
        return _load_sparse(path, n_features, label_kind or "classification")
    raise ValueError(f"unknown format {format!r}")


def _load_dense(path, label_kind):
    with open(path, "rb") as fh:
        blob = fh.read()
    header = struct.calcsize("<QQB")
    if blob[:4] != _MAGIC:
        raise ParseError(f"bad magic {blob[:4]!r}, expected {_MAGIC!r}")
    if len(blob) < 4 + header:
        raise ParseError("truncated header")
    N, M, kind_byte = struct.unpack_from("<QQB", blob, 4)
    if kind_byte not in _BYTE_KIND:
        raise ParseError(f"unknown label-kind byte {kind_byte}")
    body = blob[4 + header:]
    want = (N * M + N) * 8
    if len(body) != want:
        raise ParseError(f"payload is {len(body)} bytes, expected {want}")
    X = np.frombuffer(body[: N * M * 8], dtype="<f8").reshape(N, M).copy()
    y = np.frombuffer(body[N * M * 8:], dtype="<f8").copy()
    kind = label_kind or _BYTE_KIND[kind_byte]
    return DataGrid(X, _map_labels(y, kind))


def _load_sparse(path, n_features, label_kind):
    labels: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    max_idx = 0
    lineno = 0
    with open(path) as fh:
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", line=lineno, offset=0)
            seen = set()
            for off, tok in enumerate(tokens[1:], start=1):
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected index:value, got {tok!r}", lineno, off)
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"bad index:value pair {tok!r}", lineno, off)
                if idx < 1:
                    raise ParseError(f"feature index {idx} must be >= 1", lineno, off)
                if n_features is not None and idx > n_features:
                    raise ParseError(
                        f"feature index {idx} exceeds n_features={n_features}",
                        lineno,
                        off,
                    )
                if idx in seen:
                    raise ParseError(f"duplicate feature index {idx}", lineno, off)
                seen.add(idx)
                rows.append(len(labels) - 1)
                cols.append(idx - 1)
                vals.append(val)
                max_idx = max(max_idx, idx)
    N = len(labels)
    M = n_features if n_features is not None else max_idx
    X = sp.csr_matrix(
        (vals, (rows, cols)), shape=(N, M), dtype=np.float64
    )
    y = _map_labels(np.asarray(labels, dtype=np.float64), label_kind)
    return DataGrid(X, y)
