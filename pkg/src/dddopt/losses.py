"""Loss models and their per-observation, masked and sub-block gradients.

Every loss here has the linear-model form f_j(w) = fbar(x_j . w, y_j), so a
gradient is always the scalar derivative of fbar at the margin times the row
x_j. That structure is what makes the masked and sub-block variants cheap:
restricting the inner product to a feature subset and the output coordinates
to another subset never needs the full row.

Gradients are unregularized by default; the ridge term enters the objective
value always, and enters gradients only when the caller asks for regularized
mode (or the model opts into carrying l2_reg / distributed per observation).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, LabelError, SubsetError
from .grid import DataGrid, subblock_feature_range
from .theory import TheoryConstants

KINDS = ("hinge", "smoothed_hinge", "logistic", "least_squares")
_CLASSIFICATION = ("hinge", "smoothed_hinge", "logistic")

# curvature of the scalar fbar, used as the per-observation Lipschitz factor
_CURVATURE = {
    "least_squares": 1.0,
    "logistic": 0.25,
    "smoothed_hinge": 1.0,
}


@dataclass(frozen=True)
class LossModel:
    """A loss kind plus ridge strength.

    ``regularize_inner=True`` distributes the ridge gradient into every
    per-observation gradient (so stochastic inner updates see it); by default
    the ridge term only shows up in objective values and in explicitly
    regularized full gradients.
    """

    kind: str
    l2_reg: float = 0.0
    regularize_inner: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; choose from {KINDS}")
        if self.l2_reg < 0.0:
            raise ValueError(f"l2_reg must be >= 0, got {self.l2_reg}")

    def value(self, z, y):
        """fbar(z, y), vectorized."""
        z = np.asarray(z, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "least_squares":
            return 0.5 * (z - y) ** 2
        if self.kind == "hinge":
            return np.maximum(0.0, 1.0 - y * z)
        if self.kind == "smoothed_hinge":
            return 0.5 * np.maximum(0.0, 1.0 - y * z) ** 2
        # logistic: log(1 + exp(-y z)) without overflow
        return np.logaddexp(0.0, -y * z)

    def deriv(self, z, y):
        """d fbar / d z, vectorized.

        The hinge derivative at the kink y*z == 1 is defined as 0 (a valid
        subgradient, and the one that makes the margin-1 gradient vanish).
        """
        z = np.asarray(z, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "least_squares":
            return z - y
        if self.kind == "hinge":
            return np.where(y * z < 1.0, -y, 0.0)
        if self.kind == "smoothed_hinge":
            return -y * np.maximum(0.0, 1.0 - y * z)
        return -y / (1.0 + np.exp(y * z))


def _check_labels(model: LossModel, grid: DataGrid):
    if model.kind in _CLASSIFICATION and grid.N:
        if not np.isin(grid.y, (-1.0, 1.0)).all():
            raise LabelError(f"{model.kind} needs labels in {{-1, +1}}")


def _values(w, M: int) -> np.ndarray:
    v = np.asarray(w, dtype=np.float64).reshape(-1)
    if v.shape[0] != M:
        raise DimensionError(f"parameter length {v.shape[0]} != M={M}")
    return v


def loss_value(model: LossModel, grid: DataGrid, w) -> float:
    """Average loss over the grid plus the ridge term.

    (1/N) sum_j fbar(x_j . w, y_j) + (l2_reg / 2) ||w||^2
    """
    _check_labels(model, grid)
    wv = _values(w, grid.M)
    z = grid.margins(wv)
    reg = 0.5 * model.l2_reg * float(wv @ wv)
    return float(np.mean(model.value(z, grid.y))) + reg


def per_obs_gradient(
    model: LossModel, grid: DataGrid, j: int, w, regularized: bool = False
) -> np.ndarray:
    """Gradient of observation j's loss at w, length M."""
    _check_labels(model, grid)
    wv = _values(w, grid.M)
    row = grid.row(j)
    g = float(model.deriv(row @ wv, grid.y[j])) * row
    if regularized or model.regularize_inner:
        g = g + model.l2_reg * wv
    return g


def masked_gradient(model: LossModel, grid: DataGrid, j: int, w, B, C) -> np.ndarray:
    """Gradient of observation j with the margin restricted to features B and
    the output coordinates restricted to C, zero elsewhere.

    The margin is x_j[B] . w[B] (not the full inner product), so this is the
    gradient a node holding only the B columns can actually evaluate. C must
    be a subset of B.
    """
    _check_labels(model, grid)
    wv = _values(w, grid.M)
    B = np.asarray(B, dtype=np.intp)
    C = np.asarray(C, dtype=np.intp)
    if C.size and not np.isin(C, B).all():
        missing = C[~np.isin(C, B)][0]
        raise SubsetError(f"mask coordinate {missing} is not in the margin set")
    row = grid.row(j)
    z = float(row[B] @ wv[B])
    out = np.zeros(grid.M)
    out[C] = float(model.deriv(z, grid.y[j])) * row[C]
    if model.regularize_inner:
        out[C] += model.l2_reg * wv[C]
    return out


def subblock_gradient(
    model: LossModel,
    grid: DataGrid,
    p: int,
    q: int,
    k: int,
    j_local: int,
    w_sub,
) -> np.ndarray:
    """Gradient of one observation restricted to sub-block (q, k).

    ``j_local`` indexes rows inside observation partition p (1-based p), so
    the global row is (p-1)*n + j_local. Both the margin and the output live
    on the sub-block's mt features; this is everything a worker holding one
    cell of the grid can see.
    """
    scheme = grid.scheme
    if scheme is None:
        raise DimensionError("grid has no partition scheme attached")
    if not 0 <= j_local < scheme.n:
        raise IndexError(f"local row {j_local} outside 0..{scheme.n - 1}")
    lo, hi = subblock_feature_range(scheme, q, k)
    if not 1 <= p <= scheme.P:
        raise IndexError(f"partition index p={p} outside 1..{scheme.P}")
    ws = np.asarray(w_sub, dtype=np.float64).reshape(-1)
    if ws.shape[0] != scheme.mt:
        raise DimensionError(f"sub-block length {ws.shape[0]} != mt={scheme.mt}")
    j = (p - 1) * scheme.n + j_local
    xr = grid.row_range(j, lo, hi)
    g = float(model.deriv(float(xr @ ws), grid.y[j])) * xr
    if model.regularize_inner:
        g = g + model.l2_reg * ws
    return g


def estimate_constants(model: LossModel, grid: DataGrid, w=None) -> TheoryConstants:
    """Measure the smoothness and gradient-variance constants from data.

    The per-observation gradient Lipschitz constant is max_j ||x_j||^2 times
    the curvature of the scalar loss. The hinge is not differentiable, so its
    entry is the smoothed-hinge curvature and a warning flags the substitute.
    The variance constant squared is the sample variance of the
    per-observation gradient norms at w (default w = 0):

        (1/(N-1)) * sum_j (||grad f_j||^2 - ||grad F||^2)

    which is 0 by convention when N == 1.
    """
    _check_labels(model, grid)
    wv = np.zeros(grid.M) if w is None else _values(w, grid.M)
    sq = grid.row_sq_norms()
    if model.kind == "hinge":
        warnings.warn(
            "hinge loss is not smooth; reporting the smoothed-hinge curvature",
            RuntimeWarning,
            stacklevel=2,
        )
        curv = _CURVATURE["smoothed_hinge"]
    else:
        curv = _CURVATURE[model.kind]
    m3 = float(sq.max()) * curv if grid.N else 0.0

    deriv = model.deriv(grid.margins(wv), grid.y)
    grad_sq = deriv**2 * sq
    full = (grid.X.T @ deriv) / grid.N
    full = np.asarray(full).reshape(-1)
    if grid.N > 1:
        m4_sq = float(np.sum(grad_sq - float(full @ full)) / (grid.N - 1))
        m4 = float(np.sqrt(max(m4_sq, 0.0)))
    else:
        m4 = 0.0
    return TheoryConstants(
        m3=m3, m4=m4, provenance={"m3": "measured", "m4": "measured"}
    )
