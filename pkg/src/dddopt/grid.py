"""Doubly partitioned data layout.

Observations are split into P contiguous partitions of n = N / P rows each;
features are split into Q contiguous blocks of m = M / Q columns, and every
block is further cut into P sub-blocks of width mt = M / (Q * P). A parameter
vector inherits the feature layout, so the (q, k) sub-block of the model can be
updated independently of every other sub-block.

Rows and feature indices are 0-based throughout; partition labels p, block
labels q and sub-block labels k are 1-based, matching the usual "partition 1 of
P" way of talking about a grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError, DivisibilityError, EmptyDataError


@dataclass(frozen=True)
class PartitionScheme:
    """Sizes of a P-by-Q grid over an N-by-M dataset.

    Attributes
    ----------
    N, M : int
        Observation and feature counts.
    P, Q : int
        Partition counts along observations and features.
    n, m, mt : int
        Derived sizes: rows per partition, features per block, and features
        per sub-block (mt = M / (Q * P)).
    """

    N: int
    M: int
    P: int
    Q: int
    n: int = field(init=False)
    m: int = field(init=False)
    mt: int = field(init=False)

    def __post_init__(self):
        for name in ("N", "M", "P", "Q"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise DivisibilityError(f"{name} must be a positive integer, got {v!r}")
        if self.N % self.P:
            raise DivisibilityError(f"P={self.P} does not divide N={self.N}")
        if self.M % self.Q:
            raise DivisibilityError(f"Q={self.Q} does not divide M={self.M}")
        if self.M % (self.Q * self.P):
            raise DivisibilityError(
                f"Q*P={self.Q * self.P} does not divide M={self.M}; "
                "sub-blocks must tile every block without padding"
            )
        object.__setattr__(self, "n", self.N // self.P)
        object.__setattr__(self, "m", self.M // self.Q)
        object.__setattr__(self, "mt", self.M // (self.Q * self.P))


def build_scheme(N: int, M: int, P: int, Q: int) -> PartitionScheme:
    """Validate divisibility and return the grid sizes.

    Raises DivisibilityError when P does not divide N or Q * P does not
    divide M. No padding is ever applied; incompatible shapes are rejected.
    """
    if N < 1:
        raise EmptyDataError("dataset has no observations")
    return PartitionScheme(int(N), int(M), int(P), int(Q))


def block_feature_range(scheme: PartitionScheme, q: int) -> tuple[int, int]:
    """Half-open feature range [lo, hi) of block q (1-based)."""
    if not 1 <= q <= scheme.Q:
        raise IndexError(f"block index q={q} outside 1..{scheme.Q}")
    lo = (q - 1) * scheme.m
    return lo, lo + scheme.m


def subblock_feature_range(scheme: PartitionScheme, q: int, k: int) -> tuple[int, int]:
    """Half-open feature range [lo, hi) of sub-block k of block q (both 1-based).

    Sub-block (q, k) covers columns [(q-1)*m + (k-1)*mt, (q-1)*m + k*mt).
    Ranges over k = 1..P tile block q exactly and ranges over all (q, k) tile
    [0, M) without overlap.
    """
    if not 1 <= q <= scheme.Q:
        raise IndexError(f"block index q={q} outside 1..{scheme.Q}")
    if not 1 <= k <= scheme.P:
        raise IndexError(f"sub-block index k={k} outside 1..{scheme.P}")
    lo = (q - 1) * scheme.m + (k - 1) * scheme.mt
    return lo, lo + scheme.mt


def partition_row_range(scheme: PartitionScheme, p: int) -> tuple[int, int]:
    """Half-open global row range [lo, hi) of observation partition p (1-based)."""
    if not 1 <= p <= scheme.P:
        raise IndexError(f"partition index p={p} outside 1..{scheme.P}")
    lo = (p - 1) * scheme.n
    return lo, lo + scheme.n


def row_partition(scheme: PartitionScheme, j: int) -> int:
    """1-based partition label owning global row j (rows are contiguous)."""
    if not 0 <= j < scheme.N:
        raise IndexError(f"row {j} outside 0..{scheme.N - 1}")
    return j // scheme.n + 1


class DataGrid:
    """Dataset facade with dense or sparse storage and an optional grid scheme.

    Parameters
    ----------
    X : ndarray of shape (N, M) or scipy.sparse matrix
        Feature matrix. Dense input is kept as C-contiguous float64; sparse
        input is kept as CSR.
    y : ndarray of shape (N,)
        Labels, float64. Classification tasks use {-1, +1}.
    scheme : PartitionScheme, optional
        Attached later via with_scheme when the caller knows (P, Q).
    """

    def __init__(self, X, y, scheme: PartitionScheme | None = None):
        if sp.issparse(X):
            self.X = X.tocsr().astype(np.float64)
            self.storage_kind = "sparse"
        else:
            self.X = np.ascontiguousarray(X, dtype=np.float64)
            if self.X.ndim != 2:
                raise DimensionError(f"X must be 2-D, got shape {self.X.shape}")
            self.storage_kind = "dense"
        self.y = np.asarray(y, dtype=np.float64).reshape(-1)
        if self.y.shape[0] != self.X.shape[0]:
            raise DimensionError(
                f"{self.X.shape[0]} rows but {self.y.shape[0]} labels"
            )
        if scheme is not None and (scheme.N, scheme.M) != self.X.shape:
            raise DimensionError(
                f"scheme is {scheme.N}x{scheme.M} but data is {self.X.shape}"
            )
        self.scheme = scheme

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def M(self) -> int:
        return self.X.shape[1]

    def with_scheme(self, P: int, Q: int) -> "DataGrid":
        """Return a grid sharing this data with a (P, Q) scheme attached."""
        return DataGrid(self.X, self.y, build_scheme(self.N, self.M, P, Q))

    # Row accessors always hand back dense 1-D float64 so the numeric kernels
    # see one representation regardless of storage_kind.
    def row(self, j: int) -> np.ndarray:
        if self.storage_kind == "dense":
            return self.X[j]
        return np.asarray(self.X[j].todense()).reshape(-1)

    def row_range(self, j: int, lo: int, hi: int) -> np.ndarray:
        if self.storage_kind == "dense":
            return self.X[j, lo:hi]
        return np.asarray(self.X[j, lo:hi].todense()).reshape(-1)

    def rows_cols(self, rows, cols) -> np.ndarray:
        """Dense (len(rows), len(cols)) submatrix."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        if self.storage_kind == "dense":
            return self.X[np.ix_(rows, cols)]
        return np.asarray(self.X[rows][:, cols].todense())

    def margins(self, w) -> np.ndarray:
        """X @ w as a dense vector of length N."""
        out = self.X @ np.asarray(w, dtype=np.float64)
        return np.asarray(out).reshape(-1)

    def row_sq_norms(self) -> np.ndarray:
        if self.storage_kind == "dense":
            return np.einsum("ij,ij->i", self.X, self.X)
        return np.asarray(self.X.multiply(self.X).sum(axis=1)).reshape(-1)


class ParameterVector:
    """Model vector laid out on the feature grid of a PartitionScheme.

    Block q views the slice [(q-1)*m, q*m); sub-block (q, k) views the slice
    given by subblock_feature_range. Views alias the underlying array, so the
    concatenation of all sub-block views in (q, k) order is the vector itself.
    """

    def __init__(self, values, scheme: PartitionScheme):
        self.values = np.asarray(values, dtype=np.float64).reshape(-1)
        if self.values.shape[0] != scheme.M:
            raise DimensionError(
                f"parameter length {self.values.shape[0]} != M={scheme.M}"
            )
        self.scheme = scheme

    @classmethod
    def zeros(cls, scheme: PartitionScheme) -> "ParameterVector":
        return cls(np.zeros(scheme.M), scheme)

    def block(self, q: int) -> np.ndarray:
        lo, hi = block_feature_range(self.scheme, q)
        return self.values[lo:hi]

    def subblock(self, q: int, k: int) -> np.ndarray:
        lo, hi = subblock_feature_range(self.scheme, q, k)
        return self.values[lo:hi]

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.scheme)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None):
        return self.values if dtype is None else self.values.astype(dtype)
