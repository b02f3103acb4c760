"""Step-size schedules and convergence-certificate calculators.

These functions turn measured or supplied problem constants into the knobs the
engine needs: how large the feature sample must be for the anchor truncation
error to stay within a chosen budget, how long the inner loop must run for the
diminishing-rate guarantee, and which constant rates admit a linear phase.

Every bound comes back as both the real-valued expression and the integer
(ceiled/clamped) value actually usable as a sample size, and each constant is
tracked as measured-from-data or supplied-by-the-caller so reports can say
which is which.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .exceptions import ConstantError, RootError

SCHEDULE_KINDS = ("inverse_t", "experiment", "constant")


@dataclass(frozen=True)
class Schedule:
    """A step-size rule. ``gamma0`` is only meaningful for kind="constant"."""

    kind: str
    gamma0: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule {self.kind!r}; choose from {SCHEDULE_KINDS}")
        if self.kind == "constant" and self.gamma0 < 0.0:
            raise ValueError("constant schedule needs gamma0 >= 0 (0 freezes the iterate)")


def gamma(schedule: Schedule, t: int) -> float:
    """Step size for 1-based iteration t.

    inverse_t:   1 / t
    experiment:  1 / (1 + sqrt(t - 1))
    constant:    gamma0
    """
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    if schedule.kind == "inverse_t":
        return 1.0 / t
    if schedule.kind == "experiment":
        return 1.0 / (1.0 + math.sqrt(t - 1.0))
    return schedule.gamma0


@dataclass
class TheoryConstants:
    """Problem constants: iterate-norm bound m1, strong convexity m2,
    per-observation gradient Lipschitz constant m3, gradient-norm variance
    bound m4, and the anchor-error budget coefficient b.

    ``provenance`` records, per constant, whether it was measured from data or
    supplied by the caller. m3 below 1 is legal to store but flagged, because
    the certificates assume m3 >= 1.
    """

    m1: float | None = None
    m2: float | None = None
    m3: float | None = None
    m4: float | None = None
    b: float | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def m3_meets_floor(self) -> bool | None:
        return None if self.m3 is None else self.m3 >= 1.0

    def require(self, *names: str) -> list[float]:
        out = []
        for name in names:
            v = getattr(self, name)
            if v is None:
                raise ConstantError(f"constant {name} is required but not set")
            # b is a budget coefficient and may be 0; the rest must be positive
            if name == "b":
                if v < 0.0:
                    raise ConstantError(f"constant b must be >= 0, got {v}")
            elif v <= 0.0:
                raise ConstantError(f"constant {name} must be > 0, got {v}")
            out.append(float(v))
        return out


class Bound(NamedTuple):
    value: float  # real-valued bound
    count: int    # integer sample size or batch length implementing it


class LambdaRate(NamedTuple):
    value: float
    induction_ok: bool  # the diminishing-rate argument needs value > 1


class GapBound(NamedTuple):
    value: float
    tag: str


class ConstantRateBound(NamedTuple):
    gamma_max: float
    parts: dict  # keys: "one", "lip", "g1", "g2"


def b_lower_bound(M: int, c: int, gamma_next: float, tc: TheoryConstants) -> Bound:
    """Smallest feature-sample size b keeping the anchor truncation error
    within b_budget * gamma^2.

    Real-valued bound: max(c, M / (1 + 4*M*b_budget*gamma^2 / (c*m1^2*m3^2))),
    ceiled and clamped to at most M. A zero budget forces b = M (no
    truncation allowed).
    """
    m1, m3, budget = tc.require("m1", "m3", "b")
    if not 1 <= c <= M:
        raise ConstantError(f"need 1 <= c <= M, got c={c}, M={M}")
    if gamma_next <= 0.0:
        raise ConstantError(f"need gamma_next > 0, got {gamma_next}")
    slack = 4.0 * M * budget * gamma_next**2 / (c * m1**2 * m3**2)
    value = max(float(c), M / (1.0 + slack))
    return Bound(value, min(math.ceil(value), M))


def min_inner_batch(M: int, c: int, tc: TheoryConstants) -> Bound:
    """Shortest inner loop supporting the diminishing-rate guarantee:
    ceil(M / (2 * c * m2)), never below 1."""
    (m2,) = tc.require("m2")
    if not 1 <= c <= M:
        raise ConstantError(f"need 1 <= c <= M, got c={c}, M={M}")
    value = M / (2.0 * c * m2)
    return Bound(value, max(1, math.ceil(value)))


def lambda_rate(M: int, L: int, tc: TheoryConstants) -> LambdaRate:
    """Rate constant 2*m2*L/M of the diminishing-rate argument.

    The induction behind the O(1/t) guarantee needs this to exceed 1; the
    returned flag is False when it does not, which callers should surface as
    a certificate warning rather than an error.
    """
    (m2,) = tc.require("m2")
    if L < 1 or M < 1:
        raise ConstantError(f"need L >= 1 and M >= 1, got L={L}, M={M}")
    value = 2.0 * m2 * L / M
    return LambdaRate(value, value > 1.0)


def _cubic_root_closed_form(A: float, B: float, C: float) -> float:
    """Unique positive root of C*g^3 + B*g - A = 0 for positive A, B, C.

    Uses the hyperbolic form of the depressed-cubic solution,
    g = 2*sqrt(B/(3C)) * sinh(asinh(u)/3) with u = (3A/(2B))*sqrt(3C/B).
    For very large u the direct product under the asinh overflows, so the
    whole expression is evaluated in log space (asinh(u) ~ log(2u) there,
    with error below 1e-32 once u > 1e16).
    """
    u = (3.0 * A / (2.0 * B)) * math.sqrt(3.0 * C / B)
    if math.isfinite(u) and u <= 1e16:
        return 2.0 * math.sqrt(B / (3.0 * C)) * math.sinh(math.asinh(u) / 3.0)
    log_u = (
        math.log(3.0 * A)
        - math.log(2.0 * B)
        + 0.5 * (math.log(3.0) + math.log(C) - math.log(B))
    )
    theta = (math.log(2.0) + log_u) / 3.0
    # sinh(theta) = (e^theta - e^-theta)/2; theta is large so the first term rules
    log_g = 0.5 * (math.log(B) - math.log(3.0 * C)) + theta
    return math.exp(log_g) - math.exp(0.5 * (math.log(B) - math.log(3.0 * C)) - theta)


def _cubic_root_bisect(A: float, B: float, C: float) -> float:
    """Bisection root of C*g^3 + B*g - A = 0; the self-check route."""
    hi = min(A / B, (A / C) ** (1.0 / 3.0)) * (1.0 + 1e-12)
    lo = 0.0
    if hi <= 0.0 or not math.isfinite(hi):
        raise RootError(f"cannot bracket cubic root with A={A}, B={B}, C={C}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if C * mid**3 + B * mid - A <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cubic_step_root(A: float, B: float, C: float) -> float:
    """Positive root of C*g^3 + B*g = A, cross-checked two ways.

    The closed form must agree with an independent bisection to 1e-6
    relative; disagreement raises RootError rather than returning a number
    whose provenance is unclear.
    """
    if A <= 0.0 or B <= 0.0 or C <= 0.0:
        raise ConstantError(f"cubic needs positive coefficients, got {(A, B, C)}")
    g = _cubic_root_closed_form(A, B, C)
    ref = _cubic_root_bisect(A, B, C)
    if abs(g - ref) > 1e-6 * max(abs(ref), 1e-300):
        raise RootError(
            f"closed-form root {g!r} disagrees with bisection {ref!r} "
            f"for A={A}, B={B}, C={C}"
        )
    return g


def constant_rate_bound(
    L: int, Q: int, P: int, M: int, c_min: int, tc: TheoryConstants
) -> ConstantRateBound:
    """Largest constant step size certified for the linear-decrease phase.

    Four admissibility caps are combined: 1 (the schedule cap), the coupling
    cap 1/(L*m3*Q*P), and the roots g1, g2 of two cubics whose coefficients
    mix the inner-loop length with the grid shape:

        A1 = c_min/(m3*M)  B1 = L + (L-1)*L*m3*Q*P/m2    C1 = L^4*(1 + L^3*m3^2*Q*P)*m3^2*Q*P
        A2 = c_min/M       B2 = (L-1)*L*m3*Q*P + m3*L    C2 = L^4*(1 + L^3*m3^2*Q*P)*m3^3*Q*P

    Each root satisfies B*g + C*g^3 = A (verified against bisection before
    being returned). The overall bound is the minimum of the four parts.
    """
    m2, m3 = tc.require("m2", "m3")
    if min(L, Q, P, M, c_min) < 1:
        raise ConstantError("L, Q, P, M, c_min must all be >= 1")
    if c_min > M:
        raise ConstantError(f"c_min={c_min} exceeds M={M}")
    qp = float(Q * P)
    common = L**4 * (1.0 + L**3 * m3**2 * qp)
    a1 = c_min / (m3 * M)
    b1 = L + (L - 1) * L * m3 * qp / m2
    c1 = common * m3**2 * qp
    a2 = c_min / float(M)
    b2 = (L - 1) * L * m3 * qp + m3 * L
    c2 = common * m3**3 * qp
    parts = {
        "one": 1.0,
        "lip": 1.0 / (L * m3 * qp),
        "g1": cubic_step_root(a1, b1, c1),
        "g2": cubic_step_root(a2, b2, c2),
    }
    return ConstantRateBound(min(parts.values()), parts)


def strong_convexity_gap_bound(M: int, L: int, tc: TheoryConstants, gamma: float) -> GapBound:
    """Shape of the residual plateau under a constant rate: M*L^3*gamma/(2*m2).

    The multiplicative constant in front is not computed here (it depends on
    unreported quantities), so the value is only meaningful for comparing
    settings against each other. The tag says exactly that.
    """
    (m2,) = tc.require("m2")
    if gamma <= 0.0:
        raise ConstantError(f"need gamma > 0, got {gamma}")
    if L < 1 or M < 1:
        raise ConstantError(f"need L >= 1 and M >= 1, got L={L}, M={M}")
    return GapBound(M * L**3 * gamma / (2.0 * m2), "SHAPE-ONLY")
