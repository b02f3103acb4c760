"""Anchor-gradient estimation.

The anchor is the variance-reduction reference each outer iteration: an
average of masked per-observation gradients over a sampled observation set D,
with margins truncated to the feature sample B and output coordinates masked
to C. Scaled by M/c it is an unbiased estimate of the full gradient; the part
it cannot see (the margin mass outside B) is what estimator_error measures.

Observation rows are reduced in fixed-size shards in sorted order, so the
result is bit-identical no matter how many worker threads computed the
shards.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import DataGrid
from .losses import LossModel, _check_labels, _values
from .sampling import SampleSet

# rows per reduction shard; fixed so shard boundaries never depend on the
# thread count
_SHARD = 8192


@dataclass(frozen=True)
class AnchorGradient:
    """Anchor vector plus the arithmetic cost of producing it.

    mu is dense of length M and zero outside the mask C. grad_components
    counts written gradient coordinates (c per observation); inner_products
    counts margin multiply-add terms (b per observation).
    """

    mu: np.ndarray
    sample: SampleSet
    grad_components: int
    inner_products: int


def _shard_partial(model, grid, wv, rows, B, C):
    Xb = grid.rows_cols(rows, B)
    z = Xb @ wv[B]
    deriv = model.deriv(z, grid.y[rows])
    return deriv @ grid.rows_cols(rows, C)


def approx_full_gradient(
    model: LossModel, grid: DataGrid, w, sample: SampleSet, threads: int = 1
) -> AnchorGradient:
    """Average masked gradient over the observation sample.

    mu[C] = (1/d) * sum_{j in D} fbar'(x_j[B] . w[B], y_j) * x_j[C], zero
    elsewhere. D is processed as contiguous sorted shards and shard partials
    are added in shard order, which pins the floating-point reduction order
    regardless of ``threads``.
    """
    _check_labels(model, grid)
    wv = _values(w, grid.M)
    D = sample.D
    d = D.shape[0]
    shards = [D[i : i + _SHARD] for i in range(0, d, _SHARD)]
    if threads > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(
                pool.map(
                    lambda rows: _shard_partial(model, grid, wv, rows, sample.B, sample.C),
                    shards,
                )
            )
    else:
        partials = [
            _shard_partial(model, grid, wv, rows, sample.B, sample.C) for rows in shards
        ]
    total = np.zeros(sample.c)
    for partial in partials:
        total += partial
    mu = np.zeros(grid.M)
    mu[sample.C] = total / d
    if model.regularize_inner:
        mu[sample.C] += model.l2_reg * wv[sample.C]
    return AnchorGradient(
        mu=mu,
        sample=sample,
        grad_components=sample.c * d,
        inner_products=sample.b * d,
    )


def exact_full_gradient(
    model: LossModel, grid: DataGrid, w, regularized: bool = False
) -> np.ndarray:
    """Gradient of the average loss at w; adds the ridge term in regularized
    mode (or when the model distributes it into observations)."""
    _check_labels(model, grid)
    wv = _values(w, grid.M)
    deriv = model.deriv(grid.margins(wv), grid.y)
    g = np.asarray(grid.X.T @ deriv).reshape(-1) / grid.N
    if regularized or model.regularize_inner:
        g = g + model.l2_reg * wv
    return g


def estimator_error(
    model: LossModel, grid: DataGrid, w, sample: SampleSet
) -> tuple[float, np.ndarray]:
    """Margin-truncation error of the anchor, for diagnostics.

    e = (1/d) * sum_{j in D} [ masked grad with margin over B
                               - masked grad with the full margin ],
    both masked to C. This isolates what restricting the inner product to B
    cost; the C-masking and D-averaging are common to both terms and cancel
    in expectation. Returns (||e||, e).
    """
    _check_labels(model, grid)
    wv = _values(w, grid.M)
    D = sample.D
    Xb = grid.rows_cols(D, sample.B)
    z_trunc = Xb @ wv[sample.B]
    z_full = grid.margins(wv)[D]
    diff = model.deriv(z_trunc, grid.y[D]) - model.deriv(z_full, grid.y[D])
    e = np.zeros(grid.M)
    e[sample.C] = (diff @ grid.rows_cols(D, sample.C)) / D.shape[0]
    return float(np.linalg.norm(e)), e
