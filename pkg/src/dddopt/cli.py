"""Command-line interface.

Subcommands: generate, train, compare, sweep, bounds. A config file given
with --config holds ``key = value`` lines ('#' starts a comment) whose keys
are the long flag names without the leading dashes; explicit command-line
flags override file values. Every resolved setting is echoed into the trace
header, so a run is reproducible from its own output.

Module errors exit nonzero after printing a one-line JSON error record
({"error": <type>, "message": <text>}) to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .datasets import generate_synthetic, save_dataset
from .engine import RunConfig
from .exceptions import DddoptError, ParseError
from .harness import (
    ExperimentSpec,
    GenerateParams,
    bounds_report,
    compare,
    load_grid,
    run_experiment,
    run_seeds,
    sweep_stats,
    trace_losses,
)
from .losses import KINDS as LOSS_KINDS, LossModel, estimate_constants
from .theory import SCHEDULE_KINDS, Schedule, TheoryConstants


def _read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; keys use the long flag spellings."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(f"expected 'key = value', got {line!r}", line=lineno)
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _add_dataset_flags(p: argparse.ArgumentParser):
    p.add_argument("--dataset", help="dataset file path")
    p.add_argument("--format", choices=("dense", "sparse"), default="dense",
                   help="dataset file format")
    p.add_argument("--gen-N", type=int, help="generate a synthetic dataset with N rows")
    p.add_argument("--gen-M", type=int, help="synthetic feature count")
    p.add_argument("--gen-seed", type=int, default=0, help="synthetic data seed")
    p.add_argument("--gen-flip-prob", type=float, default=0.01,
                   help="synthetic label flip probability")


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--P", type=int, default=1, help="observation partitions")
    p.add_argument("--Q", type=int, default=1, help="feature blocks")
    p.add_argument("--L", type=int, default=4, help="inner steps per worker")
    p.add_argument("--T", type=int, default=20, help="outer iterations")
    p.add_argument("--schedule", choices=SCHEDULE_KINDS, default="experiment")
    p.add_argument("--gamma0", type=float, default=0.1,
                   help="step size for the constant schedule")
    p.add_argument("--b-frac", type=float, default=1.0, help="feature margin fraction")
    p.add_argument("--c-frac", type=float, default=1.0, help="feature update fraction")
    p.add_argument("--d-frac", type=float, default=1.0, help="observation fraction")
    p.add_argument("--pi", choices=("uniform", "cyclic"), default="uniform",
                   help="sub-block assignment policy")
    p.add_argument("--loss", choices=LOSS_KINDS, default="hinge")
    p.add_argument("--l2", type=float, default=0.0, help="ridge strength")
    p.add_argument("--seed", type=int, default=0, help="algorithm seed")
    p.add_argument("--seeds", help="comma-separated algorithm seeds (overrides --seed)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--diagnostics", action="store_true",
                   help="record per-iteration instrumentation")
    p.add_argument("--eval-every", type=int, default=1,
                   help="evaluate the objective every this many iterations")


def _dataset_from_args(args) -> tuple:
    if args.dataset is not None:
        return args.dataset, args.format
    if args.gen_N is not None and args.gen_M is not None:
        return (
            GenerateParams(args.gen_N, args.gen_M, args.gen_seed, args.gen_flip_prob),
            "dense",
        )
    raise DddoptError("give --dataset or both --gen-N and --gen-M")


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        P=args.P,
        Q=args.Q,
        L=args.L,
        T=args.T,
        schedule=Schedule(args.schedule, args.gamma0),
        b_frac=args.b_frac,
        c_frac=args.c_frac,
        d_frac=args.d_frac,
        pi_policy=args.pi,
        seed=args.seed,
        loss=LossModel(args.loss, l2_reg=args.l2),
        eval_every=args.eval_every,
        diagnostics=args.diagnostics,
    )


def _seeds_from_args(args) -> tuple:
    if args.seeds:
        return tuple(int(s) for s in args.seeds.split(","))
    return (args.seed,)


def _spec_from_args(args, algorithm: str, out=None) -> ExperimentSpec:
    dataset, fmt = _dataset_from_args(args)
    return ExperimentSpec(
        dataset=dataset,
        dataset_format=fmt,
        config=_config_from_args(args),
        seeds=_seeds_from_args(args),
        algorithm=algorithm,
        out=out if out is not None else args.out,
    )


def _cmd_generate(args) -> int:
    grid = generate_synthetic(args.N, args.M, args.seed, args.flip_prob)
    save_dataset(grid, args.out, args.format)
    print(f"wrote {args.N}x{args.M} dataset to {args.out} ({args.format})")
    return 0


def _cmd_train(args) -> int:
    spec = _spec_from_args(args, args.algorithm)
    result = run_experiment(spec)
    for seed, path in result["traces"].items():
        print(f"seed {seed}: {path}")
    print(f"summary: {result['summary']}")
    return 0


def _cmd_compare(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec_a = _spec_from_args(args, args.a, out=str(out_dir / "a"))
    spec_b = _spec_from_args(args, args.b, out=str(out_dir / "b"))
    report = compare(spec_a, spec_b, csv_path=out_dir / "compare.csv")
    with open(out_dir / "compare.json", "w") as fh:
        json.dump(
            {"a": args.a, "b": args.b, "crossing_budget": report.crossing_budget},
            fh,
            indent=2,
            sort_keys=True,
        )
    print(f"per-iteration curves: {report.csv_path}")
    if report.crossing_budget is None:
        print("curves do not cross on the shared budget range")
    else:
        print(f"first crossing at grad-component budget {report.crossing_budget:.6g}")
    return 0


def _cmd_sweep(args) -> int:
    spec = _spec_from_args(args, args.algorithm)
    result = run_experiment(spec)
    states = run_seeds(spec)
    stats = sweep_stats(trace_losses(states))
    stats_path = Path(args.out) / "sweep_stats.json"
    with open(stats_path, "w") as fh:
        json.dump(stats.as_dict(), fh, indent=2, sort_keys=True)
    for name, value in stats.as_dict().items():
        print(f"{name} = {value:.6g}")
    print(f"stats: {stats_path}")
    print(f"summary: {result['summary']}")
    return 0


def _cmd_bounds(args) -> int:
    tc = TheoryConstants(
        m1=args.m1,
        m2=args.m2,
        m3=args.m3,
        m4=args.m4,
        b=args.B,
        provenance={
            name: "supplied"
            for name, v in (
                ("m1", args.m1), ("m2", args.m2), ("m3", args.m3),
                ("m4", args.m4), ("b", args.B),
            )
            if v is not None
        },
    )
    if args.dataset is not None or (args.gen_N is not None and args.gen_M is not None):
        dataset, fmt = _dataset_from_args(args)
        spec_like = ExperimentSpec(
            dataset=dataset,
            dataset_format=fmt,
            config=RunConfig(P=1, Q=1, L=1, T=0),
            seeds=(0,),
        )
        grid = load_grid(spec_like)
        measured = estimate_constants(LossModel(args.loss), grid)
        if tc.m3 is None:
            tc = dataclasses.replace(
                tc, m3=measured.m3, provenance={**tc.provenance, "m3": "measured"}
            )
        if tc.m4 is None:
            tc = dataclasses.replace(
                tc, m4=measured.m4, provenance={**tc.provenance, "m4": "measured"}
            )
    report = bounds_report(
        tc, L=args.L, Q=args.Q, P=args.P, M=args.M, c_min=args.c_min,
        gamma_next=args.gamma_next,
    )
    print(report, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dddopt",
        description="doubly distributed stochastic optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset file")
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--M", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--flip-prob", type=float, default=0.01)
    g.add_argument("--format", choices=("dense", "sparse"), default="dense")
    g.add_argument("--out", required=True, help="output file path")
    g.set_defaults(fn=_cmd_generate)

    t = sub.add_parser("train", help="run one algorithm over one or more seeds")
    _add_dataset_flags(t)
    _add_run_flags(t)
    t.add_argument("--algorithm", choices=("sodda", "radisa"), default="sodda")
    t.set_defaults(fn=_cmd_train)

    c = sub.add_parser("compare", help="run two algorithms on the same data and seeds")
    _add_dataset_flags(c)
    _add_run_flags(c)
    c.add_argument("--a", choices=("sodda", "radisa"), default="sodda")
    c.add_argument("--b", choices=("sodda", "radisa"), default="radisa")
    c.set_defaults(fn=_cmd_compare)

    s = sub.add_parser("sweep", help="run many seeds and report loss dispersion")
    _add_dataset_flags(s)
    _add_run_flags(s)
    s.add_argument("--algorithm", choices=("sodda", "radisa"), default="sodda")
    s.set_defaults(fn=_cmd_sweep)

    b = sub.add_parser("bounds", help="print the certificate report")
    b.add_argument("--M", type=int, required=True)
    b.add_argument("--c-min", type=int, required=True)
    b.add_argument("--L", type=int, required=True)
    b.add_argument("--Q", type=int, required=True)
    b.add_argument("--P", type=int, required=True)
    b.add_argument("--gamma-next", type=float, default=1.0)
    b.add_argument("--m1", type=float)
    b.add_argument("--m2", type=float)
    b.add_argument("--m3", type=float)
    b.add_argument("--m4", type=float)
    b.add_argument("--B", type=float)
    b.add_argument("--loss", choices=LOSS_KINDS, default="least_squares",
                   help="loss used when measuring constants from --dataset")
    _add_dataset_flags_optional(b)
    b.set_defaults(fn=_cmd_bounds)
    return parser


def _add_dataset_flags_optional(p: argparse.ArgumentParser):
    p.add_argument("--dataset", help="measure m3/m4 from this dataset")
    p.add_argument("--format", choices=("dense", "sparse"), default="dense")
    p.add_argument("--gen-N", type=int)
    p.add_argument("--gen-M", type=int)
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--gen-flip-prob", type=float, default=0.01)


def _apply_config_file(parser: argparse.ArgumentParser, argv: list) -> list:
    """Pre-scan for --config and fold file values in as parser defaults so
    explicit flags still win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    values = _read_config_file(argv[idx + 1])
    command = argv[0] if argv and not argv[0].startswith("-") else None
    if command is None:
        return argv
    sub = next(
        a
        for a in parser._actions
        if isinstance(a, argparse._SubParsersAction)
    ).choices[command]
    defaults = {}
    for action in sub._actions:
        if action.dest in values:
            raw = values[action.dest]
            if action.type is not None:
                defaults[action.dest] = action.type(raw)
            elif isinstance(action, argparse._StoreTrueAction):
                defaults[action.dest] = raw.lower() in ("1", "true", "yes")
            else:
                defaults[action.dest] = raw
    sub.set_defaults(**defaults)
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.fn(args)
    except DddoptError as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
