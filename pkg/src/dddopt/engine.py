"""The doubly distributed optimization loop.

One outer iteration: draw the feature/observation samples, compute the anchor
gradient at the current iterate, assign each observation partition p a
sub-block of each feature block q through a permutation, and let every (p, q)
worker run L variance-reduced stochastic steps on its own mt coordinates using
only its own rows. Workers touch disjoint coordinate ranges, so their results
assemble into the next iterate without reconciliation.

Worker parallelism is capped by the DDDOPT_THREADS environment variable
(default 1). Every random draw is addressed by (seed, purpose, t, i, p, q)
labels and workers write disjoint slices, so the trajectory is identical for
any thread count.
"""

from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .anchor import AnchorGradient, approx_full_gradient, estimator_error
from .exceptions import ConfigError, DimensionError
from .grid import DataGrid, ParameterVector, subblock_feature_range
from .losses import LossModel, loss_value, subblock_gradient
from .sampling import (
    PI_POLICIES,
    RngPolicy,
    draw_assignment,
    draw_local_observation,
    draw_sets,
    resolve_fractions,
)
from .theory import Schedule, gamma as schedule_gamma


def worker_count() -> int:
    """Worker threads to use, from DDDOPT_THREADS (default 1)."""
    raw = os.environ.get("DDDOPT_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"DDDOPT_THREADS must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"DDDOPT_THREADS must be >= 1, got {threads}")
    return threads


@dataclass(frozen=True)
class CostModel:
    """Deterministic simulated-time model for trace timing.

    Traces must be byte-identical across reruns and worker counts, so the
    per-iteration ``elapsed_ms`` is computed from the op counters instead of
    the wall clock (which is reported separately in run summaries).
    """

    ops_per_ms: float = 1e6
    bytes_per_ms: float = 1e6

    def duration_ms(self, grad_components: int, inner_products: int, comm_bytes: int) -> float:
        return (grad_components + inner_products) / self.ops_per_ms + comm_bytes / self.bytes_per_ms


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs besides the data."""

    P: int
    Q: int
    L: int
    T: int
    schedule: Schedule = field(default_factory=lambda: Schedule("experiment"))
    b_frac: float = 1.0
    c_frac: float = 1.0
    d_frac: float = 1.0
    pi_policy: str = "uniform"
    seed: int = 0
    loss: LossModel = field(default_factory=lambda: LossModel("hinge"))
    eval_every: int = 1
    diagnostics: bool = False
    norm_bound: float | None = None
    cost_model: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        if self.T < 0:
            raise ConfigError(f"T must be >= 0, got {self.T}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.pi_policy not in PI_POLICIES:
            raise ConfigError(f"unknown pi_policy {self.pi_policy!r}")


def make_radisa_config(config: RunConfig) -> RunConfig:
    """The no-subsampling special case: every fraction forced to 1."""
    return replace(config, b_frac=1.0, c_frac=1.0, d_frac=1.0)


@dataclass
class TraceRecord:
    """Metrics for one completed outer iteration (0-based t).

    ``loss`` is None on iterations skipped by eval_every. Counters are for
    this iteration alone; cumulative budgets are sums over the trace.
    """

    t: int
    gamma: float
    loss: float | None
    grad_components: int
    inner_products: int
    comm_bytes: int
    elapsed_ms: float

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "gamma": self.gamma,
            "loss": self.loss,
            "grad_components": self.grad_components,
            "inner_products": self.inner_products,
            "comm_bytes": self.comm_bytes,
            "elapsed_ms": self.elapsed_ms,
        }


@dataclass
class DiagnosticsRecord:
    """Extra per-iteration instrumentation, kept off the hot path unless
    RunConfig.diagnostics is set."""

    t: int
    write_counts: np.ndarray
    first_step_max_dev: float
    estimator_error_norm: float


@dataclass
class EngineState:
    """Grid, current iterate, iteration counter, and the trace so far."""

    grid: DataGrid
    w: ParameterVector
    t: int
    trace: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    eval_wall_ms: float = 0.0
    algo_wall_ms: float = 0.0


def inner_step(
    model: LossModel,
    grid: DataGrid,
    p: int,
    q: int,
    k: int,
    w_bar: np.ndarray,
    w_anchor_sub: np.ndarray,
    mu_sub: np.ndarray,
    gamma: float,
    j_local: int,
) -> np.ndarray:
    """One variance-reduced step on sub-block (q, k) of partition p.

    w_bar - gamma * (g(w_bar) - g(w_anchor_sub) + mu_sub), where g is the
    sub-block gradient at local observation j_local. Both gradients use the
    same observation, so when w_bar equals the anchor they cancel exactly and
    the step is -gamma * mu_sub.
    """
    g_cur = subblock_gradient(model, grid, p, q, k, j_local, w_bar)
    g_anchor = subblock_gradient(model, grid, p, q, k, j_local, w_anchor_sub)
    return w_bar - gamma * (g_cur - g_anchor + mu_sub)


def _worker_update(model, grid, p, q, k, anchor_sub, mu_sub, gamma, L, t, rng, want_dev):
    """Run L inner steps for one (p, q) cell; returns the new sub-block and,
    when asked, the worst deviation of the first displacement from
    -gamma * mu_sub (exactly zero by the cancellation argument)."""
    w_bar = anchor_sub.copy()
    first_dev = 0.0
    for i in range(L):
        n = grid.scheme.n
        j_local = draw_local_observation(n, t, i, p, q, rng)
        w_next = inner_step(model, grid, p, q, k, w_bar, anchor_sub, mu_sub, gamma, j_local)
        if want_dev and i == 0:
            # starting at the anchor, the two gradient terms cancel bitwise,
            # so the update must equal this reference expression exactly
            first_dev = float(np.max(np.abs(w_next - (w_bar - gamma * mu_sub))))
        w_bar = w_next
    return w_bar, first_dev


def run_outer_iteration(state: EngineState, config: RunConfig) -> EngineState:
    """Advance the state by one outer iteration, appending one trace record."""
    grid = state.grid
    scheme = grid.scheme
    if scheme is None or scheme.P != config.P or scheme.Q != config.Q:
        raise DimensionError("grid scheme does not match the (P, Q) in config")
    model = config.loss
    t = state.t
    start = time.perf_counter()

    gamma_t = schedule_gamma(config.schedule, t + 1)
    b, c, d = resolve_fractions(scheme, config.b_frac, config.c_frac, config.d_frac)
    if b < c:
        raise ConfigError(f"resolved b={b} < c={c}")
    rng = RngPolicy(config.seed)
    sample = draw_sets(scheme, b, c, d, t, rng)
    threads = worker_count()
    anchor = approx_full_gradient(model, grid, state.w.values, sample, threads=threads)
    assignment = draw_assignment(scheme, t, rng, config.pi_policy)

    tasks = []
    for q in range(1, scheme.Q + 1):
        for p in range(1, scheme.P + 1):
            k = assignment.subblock_for(q, p)
            lo, hi = subblock_feature_range(scheme, q, k)
            tasks.append((p, q, k, lo, hi))

    w_old = state.w.values

    def run_task(task):
        p, q, k, lo, hi = task
        return _worker_update(
            model,
            grid,
            p,
            q,
            k,
            w_old[lo:hi].copy(),
            anchor.mu[lo:hi],
            gamma_t,
            config.L,
            t,
            rng,
            config.diagnostics,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = [run_task(task) for task in tasks]

    new_values = w_old.copy()
    for (p, q, k, lo, hi), (w_bar, _) in zip(tasks, results):
        new_values[lo:hi] = w_bar
    new_w = ParameterVector(new_values, scheme)

    if config.norm_bound is not None:
        norm = float(np.linalg.norm(new_values))
        if norm > config.norm_bound / 2.0:
            warnings.warn(
                f"iterate norm {norm:.6g} exceeds the configured radius "
                f"{config.norm_bound / 2.0:.6g} at iteration {t}",
                RuntimeWarning,
                stacklevel=2,
            )

    grad_components = anchor.grad_components + 2 * scheme.mt * scheme.Q * scheme.P * config.L
    inner_products = anchor.inner_products + 2 * scheme.Q * scheme.P * config.L
    comm_bytes = 8 * (c * scheme.P + scheme.mt * scheme.Q * scheme.P + scheme.M)
    elapsed_ms = config.cost_model.duration_ms(grad_components, inner_products, comm_bytes)
    state.algo_wall_ms += (time.perf_counter() - start) * 1e3

    loss = None
    if (t + 1) % config.eval_every == 0:
        eval_start = time.perf_counter()
        loss = loss_value(model, grid, new_values)
        state.eval_wall_ms += (time.perf_counter() - eval_start) * 1e3

    state.trace.append(
        TraceRecord(
            t=t,
            gamma=gamma_t,
            loss=loss,
            grad_components=grad_components,
            inner_products=inner_products,
            comm_bytes=comm_bytes,
            elapsed_ms=elapsed_ms,
        )
    )
    if config.diagnostics:
        counts = np.zeros(scheme.M, dtype=np.int64)
        for _, _, _, lo, hi in tasks:
            counts[lo:hi] += 1
        e_norm, _ = estimator_error(model, grid, w_old, sample)
        state.diagnostics.append(
            DiagnosticsRecord(
                t=t,
                write_counts=counts,
                first_step_max_dev=max(dev for _, dev in results),
                estimator_error_norm=e_norm,
            )
        )
    state.w = new_w
    state.t = t + 1
    return state


def run(config: RunConfig, grid: DataGrid) -> EngineState:
    """Run T outer iterations from a zero start.

    The grid gains a (P, Q) scheme if it does not carry a matching one;
    divisibility failures surface before any work happens.
    """
    scheme = grid.scheme
    if scheme is None or (scheme.P, scheme.Q) != (config.P, config.Q):
        grid = grid.with_scheme(config.P, config.Q)
    state = EngineState(grid=grid, w=ParameterVector.zeros(grid.scheme), t=0)
    for _ in range(config.T):
        state = run_outer_iteration(state, config)
    return state
