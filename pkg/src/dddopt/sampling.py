"""Index sampling: feature/observation sets, sub-block assignments, and the
seed discipline that makes every draw addressable.

All randomness flows through RngPolicy, which derives an independent Philox
stream (counter based, so there are far more than 2^64 usable streams) from
the master seed plus a structured label: a purpose tag and the coordinates
(t, q, p, i) that identify the draw. Any worker can therefore reproduce any
draw without coordination, and results cannot depend on which thread happened
to ask first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import FractionError, SizeError
from .grid import PartitionScheme

# fixed purpose tags; never reuse a number
_PURPOSE = {"sets": 1, "assignment": 2, "local": 3}

PI_POLICIES = ("uniform", "cyclic")


@dataclass(frozen=True)
class RngPolicy:
    """Derives named random streams from one master seed."""

    master_seed: int

    def __post_init__(self):
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")

    def stream(self, purpose: str, *coords: int) -> np.random.Generator:
        """Independent generator for (master_seed, purpose, *coords)."""
        key = (_PURPOSE[purpose],) + tuple(int(c) for c in coords)
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SampleSet:
    """Index sets drawn for one outer iteration: features B (margin set),
    C subset of B (update coordinates), observations D (anchor rows)."""

    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    t: int

    @property
    def b(self) -> int:
        return self.B.shape[0]

    @property
    def c(self) -> int:
        return self.C.shape[0]

    @property
    def d(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class Assignment:
    """One permutation of {1..P} per feature block q, stored as an array of
    shape (Q, P): pi[q-1][p-1] is the sub-block index worked by partition p."""

    pi: np.ndarray

    def subblock_for(self, q: int, p: int) -> int:
        return int(self.pi[q - 1][p - 1])


def draw_sets(scheme: PartitionScheme, b: int, c: int, d: int, t: int, rng: RngPolicy) -> SampleSet:
    """Uniform without-replacement draws: B over [0, M), C over B, D over [0, N).

    Sets come back sorted. Deterministic per (master_seed, t): the same call
    always returns the same sets.
    """
    if not 1 <= c <= b <= scheme.M:
        raise SizeError(f"need 1 <= c <= b <= M, got c={c}, b={b}, M={scheme.M}")
    if not 1 <= d <= scheme.N:
        raise SizeError(f"need 1 <= d <= N, got d={d}, N={scheme.N}")
    gen = rng.stream("sets", t)
    B = np.sort(gen.choice(scheme.M, size=b, replace=False))
    C = np.sort(gen.choice(B, size=c, replace=False))
    D = np.sort(gen.choice(scheme.N, size=d, replace=False))
    return SampleSet(B=B, C=C, D=D, t=t)


def draw_assignment(
    scheme: PartitionScheme, t: int, rng: RngPolicy, policy: str = "uniform"
) -> Assignment:
    """Sub-block assignment for iteration t.

    "uniform" draws an independent uniform permutation of {1..P} per block q.
    "cyclic" uses the deterministic shift pi_q(p) = ((p + t - 1) mod P) + 1,
    the same for every block; it needs no randomness and guarantees that over
    any P consecutive iterations each partition visits each sub-block once.
    """
    if policy not in PI_POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {PI_POLICIES}")
    P, Q = scheme.P, scheme.Q
    if policy == "cyclic":
        p = np.arange(1, P + 1)
        row = ((p + t - 1) % P) + 1
        pi = np.tile(row, (Q, 1))
    else:
        pi = np.empty((Q, P), dtype=np.int64)
        for q in range(1, Q + 1):
            gen = rng.stream("assignment", t, q)
            pi[q - 1] = gen.permutation(P) + 1
    return Assignment(pi=pi)


def draw_local_observation(
    n: int, t: int, i: int, p: int, q: int, rng: RngPolicy
) -> int:
    """Uniform local row in [0, n) for inner step i of worker (p, q) at
    iteration t. Each (t, i, p, q) label gets its own stream, so draws are
    independent across workers and steps and reproducible in isolation."""
    if n < 1:
        raise SizeError(f"need n >= 1, got {n}")
    gen = rng.stream("local", t, i, p, q)
    return int(gen.integers(0, n))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def resolve_fractions(
    scheme: PartitionScheme, b_frac: float, c_frac: float, d_frac: float
) -> tuple[int, int, int]:
    """Turn sampling fractions into concrete (b, c, d) counts.

    Counts are round-half-up of frac * M (or frac * N for d), then clamped so
    1 <= c <= b <= M and 1 <= d <= N. Fractions outside (0, 1] raise
    FractionError.
    """
    for name, f in (("b_frac", b_frac), ("c_frac", c_frac), ("d_frac", d_frac)):
        if not 0.0 < f <= 1.0:
            raise FractionError(f"{name} must be in (0, 1], got {f}")
    b = min(max(_round_half_up(b_frac * scheme.M), 1), scheme.M)
    c = min(max(_round_half_up(c_frac * scheme.M), 1), b)
    d = min(max(_round_half_up(d_frac * scheme.N), 1), scheme.N)
    return b, c, d
