"""Experiment harness: multi-seed runs, seed-variance stats, budgeted
comparisons, and the certificate report.

Trace files are JSON lines: a header object echoing the full provenance
(dataset, scheme, config, algorithm), then one object per outer iteration
with fields t, gamma, loss, grad_components, inner_products, comm_bytes,
elapsed_ms. Every field is deterministic, so a rerun of the same spec
produces byte-identical files; wall-clock time only appears in summary.json.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import generate_synthetic, load_dataset
from .engine import RunConfig, make_radisa_config, run
from .exceptions import ConfigError, DatasetMismatchError, LengthMismatchError
from .grid import DataGrid
from .theory import (
    TheoryConstants,
    b_lower_bound,
    constant_rate_bound,
    lambda_rate,
    min_inner_batch,
    strong_convexity_gap_bound,
)

ALGORITHMS = ("sodda", "radisa")


@dataclass(frozen=True)
class GenerateParams:
    """Synthetic-dataset recipe; the seed here is the data seed, fixed across
    algorithm seeds so every run in an experiment sees the same data."""

    N: int
    M: int
    seed: int = 0
    flip_prob: float = 0.01


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a dataset, an algorithm, a config, and seeds."""

    dataset: GenerateParams | str
    config: RunConfig
    seeds: tuple
    algorithm: str = "sodda"
    dataset_format: str = "dense"
    out: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def resolved_config(self) -> RunConfig:
        if self.algorithm == "radisa":
            return make_radisa_config(self.config)
        return self.config


def _dataset_provenance(spec: ExperimentSpec) -> dict:
    if isinstance(spec.dataset, GenerateParams):
        return {"kind": "synthetic", **dataclasses.asdict(spec.dataset)}
    return {"kind": "file", "path": str(spec.dataset), "format": spec.dataset_format}


def load_grid(spec: ExperimentSpec) -> DataGrid:
    if isinstance(spec.dataset, GenerateParams):
        g = spec.dataset
        return generate_synthetic(g.N, g.M, g.seed, g.flip_prob)
    return load_dataset(spec.dataset, spec.dataset_format)


def _config_echo(config: RunConfig) -> dict:
    echo = dataclasses.asdict(config)
    echo["schedule"] = {"kind": config.schedule.kind, "gamma0": config.schedule.gamma0}
    echo["loss"] = {
        "kind": config.loss.kind,
        "l2_reg": config.loss.l2_reg,
        "regularize_inner": config.loss.regularize_inner,
    }
    echo["cost_model"] = dataclasses.asdict(config.cost_model)
    return echo


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_seeds(spec: ExperimentSpec, grid: DataGrid | None = None) -> dict:
    """Run the spec once per seed; returns {seed: EngineState}."""
    if grid is None:
        grid = load_grid(spec)
    base = spec.resolved_config()
    out = {}
    for seed in spec.seeds:
        config = dataclasses.replace(base, seed=seed)
        out[seed] = run(config, grid)
    return out


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every seed and write trace files plus a summary.

    Returns {"traces": {seed: path}, "summary": path}. Trace files contain
    only deterministic fields; summary.json additionally carries measured
    wall-clock seconds, which is informational and excluded from any
    byte-level comparison.
    """
    if spec.out is None:
        raise ConfigError("experiment spec has no output directory")
    out_dir = Path(spec.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = load_grid(spec)
    base = spec.resolved_config()
    header_common = {
        "record": "header",
        "algorithm": spec.algorithm,
        "dataset": _dataset_provenance(spec),
        "config": _config_echo(base),
        "seeds": list(spec.seeds),
    }
    trace_paths = {}
    final_losses = {}
    wall_seconds = {}
    for seed in spec.seeds:
        config = dataclasses.replace(base, seed=seed)
        start = time.perf_counter()
        state = run(config, grid)
        wall_seconds[seed] = time.perf_counter() - start
        path = out_dir / f"trace_seed{seed}.jsonl"
        header = dict(header_common)
        header["seed"] = seed
        header["config"] = _config_echo(config)
        with open(path, "w") as fh:
            fh.write(_dump(header) + "\n")
            for rec in state.trace:
                fh.write(_dump(rec.as_dict()) + "\n")
        trace_paths[seed] = str(path)
        evaluated = [r.loss for r in state.trace if r.loss is not None]
        final_losses[seed] = evaluated[-1] if evaluated else None
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(
            {
                "algorithm": spec.algorithm,
                "dataset": _dataset_provenance(spec),
                "seeds": list(spec.seeds),
                "final_loss": {str(s): final_losses[s] for s in spec.seeds},
                "wall_seconds": {str(s): wall_seconds[s] for s in spec.seeds},
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    return {"traces": trace_paths, "summary": str(summary_path)}


@dataclass(frozen=True)
class SweepStats:
    """Across-seed dispersion of per-iteration losses.

    For each iteration take the max, min and average loss across seeds; the
    four fields aggregate (max - avg) and (avg - min) over iterations by
    averaging and by taking the worst case.
    """

    avg_max_minus_avg: float
    avg_avg_minus_min: float
    max_max_minus_avg: float
    max_avg_minus_min: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def sweep_stats(loss_rows: list) -> SweepStats:
    """Dispersion stats from per-seed loss sequences (>= 2 seeds, equal
    lengths; LengthMismatchError otherwise)."""
    if len(loss_rows) < 2:
        raise LengthMismatchError(f"need >= 2 seeds, got {len(loss_rows)}")
    lengths = {len(row) for row in loss_rows}
    if len(lengths) != 1:
        raise LengthMismatchError(f"per-seed lengths differ: {sorted(lengths)}")
    if lengths == {0}:
        raise LengthMismatchError("loss sequences are empty")
    arr = np.asarray(loss_rows, dtype=np.float64)
    hi = arr.max(axis=0)
    lo = arr.min(axis=0)
    # deviations first, then average: every term is >= 0 and identical rows
    # give exact zeros instead of a +-1ulp mean residue
    above = np.mean(hi[None, :] - arr, axis=0)
    below = np.mean(arr - lo[None, :], axis=0)
    return SweepStats(
        avg_max_minus_avg=float(np.mean(above)),
        avg_avg_minus_min=float(np.mean(below)),
        max_max_minus_avg=float(np.max(above)),
        max_avg_minus_min=float(np.max(below)),
    )


def trace_losses(states: dict) -> list:
    """Per-seed evaluated-loss sequences from {seed: EngineState}."""
    rows = []
    for seed in sorted(states):
        rows.append([r.loss for r in states[seed].trace if r.loss is not None])
    return rows


@dataclass
class ComparisonReport:
    rows: list
    crossing_budget: float | None
    csv_path: str | None


def _mean_curves(states: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Average loss / cumulative budget / cumulative comm bytes curves across
    seeds, all aligned by iteration index."""
    losses, budgets, comms = [], [], []
    for seed in sorted(states):
        trace = states[seed].trace
        if any(r.loss is None for r in trace):
            raise ConfigError("comparison needs eval_every=1 so every iteration has a loss")
        losses.append([r.loss for r in trace])
        budgets.append(np.cumsum([r.grad_components for r in trace]))
        comms.append(np.cumsum([r.comm_bytes for r in trace]))
    return (
        np.mean(np.asarray(losses), axis=0),
        np.mean(np.asarray(budgets, dtype=np.float64), axis=0),
        np.mean(np.asarray(comms, dtype=np.float64), axis=0),
    )


def loss_at_budget(budget: np.ndarray, loss: np.ndarray, x: float) -> float:
    """Loss linearly interpolated on the cumulative-budget axis."""
    return float(np.interp(x, budget, loss))


def compare(spec_a: ExperimentSpec, spec_b: ExperimentSpec, csv_path=None) -> ComparisonReport:
    """Run two specs on the same dataset and seeds; report per-iteration and
    per-budget loss curves plus the first budget where the curves cross.

    The dataset recipe (or path) and the seed list must match exactly;
    anything else raises DatasetMismatchError because the comparison would
    not be apples to apples.
    """
    if _dataset_provenance(spec_a) != _dataset_provenance(spec_b):
        raise DatasetMismatchError(
            f"datasets differ: {_dataset_provenance(spec_a)} vs {_dataset_provenance(spec_b)}"
        )
    if spec_a.seeds != spec_b.seeds:
        raise DatasetMismatchError(f"seed lists differ: {spec_a.seeds} vs {spec_b.seeds}")
    grid = load_grid(spec_a)
    states_a = run_seeds(spec_a, grid)
    states_b = run_seeds(spec_b, grid)
    loss_a, budget_a, comm_a = _mean_curves(states_a)
    loss_b, budget_b, comm_b = _mean_curves(states_b)

    rows = []
    for i in range(max(len(loss_a), len(loss_b))):
        rows.append(
            {
                "t": i,
                "budget_a": float(budget_a[i]) if i < len(budget_a) else None,
                "loss_a": float(loss_a[i]) if i < len(loss_a) else None,
                "comm_bytes_a": float(comm_a[i]) if i < len(comm_a) else None,
                "budget_b": float(budget_b[i]) if i < len(budget_b) else None,
                "loss_b": float(loss_b[i]) if i < len(loss_b) else None,
                "comm_bytes_b": float(comm_b[i]) if i < len(comm_b) else None,
            }
        )

    # first crossing on the shared budget axis
    grid_x = np.unique(np.concatenate([budget_a, budget_b]))
    lo = max(budget_a[0], budget_b[0])
    grid_x = grid_x[grid_x >= lo]
    diff = np.interp(grid_x, budget_a, loss_a) - np.interp(grid_x, budget_b, loss_b)
    crossing = None
    sign = np.sign(diff)
    for i in range(1, len(sign)):
        if sign[i] != sign[i - 1] and sign[i - 1] != 0:
            crossing = float(grid_x[i])
            break

    if csv_path is not None:
        fields = ["t", "budget_a", "loss_a", "comm_bytes_a", "budget_b", "loss_b", "comm_bytes_b"]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
    return ComparisonReport(rows=rows, crossing_budget=crossing, csv_path=csv_path and str(csv_path))


def bounds_report(
    constants: TheoryConstants,
    L: int,
    Q: int,
    P: int,
    M: int,
    c_min: int,
    gamma_next: float = 1.0,
) -> str:
    """Render every certificate this package can compute as a text report.

    Lines state which constants were measured vs supplied, the feature-sample
    floor at the given next-iteration rate, the minimum inner-loop length, the
    rate constant lambda with its induction warning, the four-part constant
    rate cap, and the plateau shape (tagged SHAPE-ONLY since its leading
    constant is not computable from reported quantities).
    """
    lines = ["certificate report", ""]
    lines.append("constants:")
    for name in ("m1", "m2", "m3", "m4", "b"):
        v = getattr(constants, name)
        src = constants.provenance.get(name, "supplied")
        lines.append(f"  {name} = {v!r} ({src if v is not None else 'missing'})")
    if constants.m3 is not None and not constants.m3_meets_floor:
        lines.append(
            f"  note: m3 = {constants.m3!r} is below the assumed floor of 1; "
            f"certificates also shown with m3 clamped to 1"
        )
    lines.append("")

    def _try(label, fn):
        try:
            fn()
        except Exception as exc:  # report every certificate it can, skip the rest
            lines.append(f"{label}: unavailable ({exc})")

    def _b_bound():
        res = b_lower_bound(M, c_min, gamma_next, constants)
        if res.count >= M:
            lines.append(
                f"feature sample: b^t must equal M = {M} at gamma = {gamma_next} "
                f"(real bound {res.value:.6g})"
            )
        else:
            lines.append(
                f"feature sample: b^t >= {res.count} of {M} at gamma = {gamma_next} "
                f"(real bound {res.value:.6g})"
            )

    def _batch():
        res = min_inner_batch(M, c_min, constants)
        lines.append(f"inner batch: L >= {res.count} (real bound {res.value:.6g})")

    def _lambda():
        res = lambda_rate(M, L, constants)
        lines.append(f"rate constant: lambda = {res.value:.6g} at L = {L}")
        if not res.induction_ok:
            lines.append(
                "  warning: lambda <= 1, the diminishing-rate induction "
                "precondition fails; the 1/t guarantee does not apply"
            )

    def _const_rate(tc=constants, suffix=""):
        res = constant_rate_bound(L, Q, P, M, c_min, tc)
        parts = ", ".join(f"{k} = {v:.6g}" for k, v in res.parts.items())
        lines.append(f"constant rate{suffix}: gamma <= {res.gamma_max:.6g}  ({parts})")

    def _gap():
        res = strong_convexity_gap_bound(M, L, constants, gamma_next)
        lines.append(
            f"plateau shape: {res.value:.6g} at gamma = {gamma_next}  [{res.tag}]"
        )

    _try("feature sample", _b_bound)
    _try("inner batch", _batch)
    _try("rate constant", _lambda)
    _try("constant rate", _const_rate)
    if constants.m3 is not None and not constants.m3_meets_floor:
        clamped = dataclasses.replace(
            constants, m3=1.0, provenance={**constants.provenance, "m3": "clamped"}
        )
        _try("constant rate (clamped m3)", lambda: _const_rate(clamped, " (m3 clamped to 1)"))
    _try("plateau shape", _gap)
    return "\n".join(lines) + "\n"
