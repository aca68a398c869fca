"""Closed-form primitives of the hybrid fluid model.

Between congestion events, in transformed time s (ds = dt/(T + x/mu)) and
scaled variables v = w/m, y = x/m, the aggregate window grows at unit rate
and the queue follows

    y(s) = y0 + c*(exp(-s) - 1) + s,    c = 1 + q + y0 - v0,

which is the exact solution of dy/ds = v - y - q. Every other module
composes these functions; nothing in the package integrates an ODE
numerically.
"""

import math
from typing import NamedTuple, Optional, Tuple

from loguru import logger

from ..models.params import Direction, FluidParams, JumpResult, NormalizedParams
from ..utils.errors import ConvergenceError, InvalidParametersError
from .roots import bracketed_root, e_minus_one_plus, grow_upper_bracket, one_minus_exp

TOUCH_TOL = 1e-12
MAX_JUMPS = 10_000


class SegmentIntegrals(NamedTuple):
    int_v: float
    int_y: float
    int_y2: float


def normalize(p: FluidParams) -> NormalizedParams:
    """Map physical parameters to the dimensionless triple (beta, q, b)."""
    if not (p.mu > 0 and p.T > 0 and p.m > 0):
        raise InvalidParametersError(f"mu, T and m must be positive: {p.mu}, {p.T}, {p.m}")
    if not 0.0 < p.beta < 1.0:
        raise InvalidParametersError(f"beta must lie in (0, 1): {p.beta}")
    if p.B < 0:
        raise InvalidParametersError(f"B must be non-negative: {p.B}")
    return NormalizedParams(beta=p.beta, q=p.mu * p.T / p.m, b=p.B / p.m)


def coefficient(v0: float, y0: float, q: float) -> float:
    """Coefficient of exp(-s) in the queue trajectory."""
    return 1.0 + q + y0 - v0


def segment_state(v0: float, y0: float, q: float, s: float) -> Tuple[float, float]:
    c = coefficient(v0, y0, q)
    return v0 + s, y0 + c * math.expm1(-s) + s


def segment_minimum(v0: float, y0: float, q: float) -> Optional[float]:
    """Time of the interior minimum of y, or None if y never decreases."""
    c = coefficient(v0, y0, q)
    if c <= 1.0:
        return None
    return math.log(c)


def minimum_value(v0: float, y0: float, q: float) -> float:
    """Smallest value of the unconstrained y on [0, inf)."""
    s0 = segment_minimum(v0, y0, q)
    if s0 is None:
        return y0
    return v0 + s0 - q


def segment_integrals(v0: float, y0: float, q: float, s: float) -> SegmentIntegrals:
    """Exact integrals of v, y and y^2 over [0, s] of one free segment."""
    c = coefficient(v0, y0, q)
    g = e_minus_one_plus(s)
    int_v = v0 * s + 0.5 * s * s
    int_y = y0 * s + 0.5 * s * s - c * g

    poly = y0 * y0 * s + y0 * s * s + s**3 / 3.0
    cross = -y0 * g + (one_minus_exp(s) - s * math.exp(-s)) - 0.5 * s * s
    square = -0.5 * math.expm1(-2.0 * s) + 2.0 * math.expm1(-s) + s
    int_y2 = poly + 2.0 * c * cross + c * c * square

    return SegmentIntegrals(int_v, int_y, int_y2)


def jump(v: float, A: float, beta: float, max_jumps: int = MAX_JUMPS) -> JumpResult:
    """Smallest k >= 1 with beta**k * v < A."""
    if v <= 0 or A <= 0:
        raise InvalidParametersError(f"jump needs v > 0 and A > 0, got v={v}, A={A}")

    k = 1
    while v * beta**k >= A:
        k += 1
        if k > max_jumps:
            raise ConvergenceError(
                f"jump multiplicity exceeded {max_jumps} (v={v}, A={A}, beta={beta})"
            )
    return JumpResult(v_after=v * beta**k, k=k)


def hit_time_to_level(
    v0: float,
    y0: float,
    q: float,
    level: float,
    direction: Direction,
    *,
    tol: float = TOUCH_TOL,
) -> Optional[float]:
    """First time the unconstrained y reaches ``level`` moving in ``direction``.

    Rising hits are searched on the increasing branch, falling hits on the
    decreasing branch. Being at the level already while moving the right way
    counts as a hit at s=0; a tangency within ``tol`` counts as a touch.
    """
    c = coefficient(v0, y0, q)

    def gap(s: float) -> float:
        return y0 + c * math.expm1(-s) + s - level

    s_min = math.log(c) if c > 1.0 else 0.0

    if direction is Direction.RISING:
        g_start = gap(s_min)
        if g_start >= 0.0:
            return s_min if g_start <= tol else None
        hi = grow_upper_bracket(gap, s_min, want_positive=True, label="rising hit")
        return bracketed_root(gap, s_min, hi, label="rising hit")

    if c <= 1.0:
        return None
    g0 = y0 - level
    if g0 < -tol:
        return None
    if g0 <= tol:
        return 0.0
    g_min = gap(s_min)
    if g_min > tol:
        return None
    if g_min >= 0.0:
        return s_min
    return bracketed_root(gap, 0.0, s_min, label="falling hit")


def slide_on_floor(v_at_touch: float, q: float, tol: float = TOUCH_TOL) -> float:
    """Length of the stretch with y = 0 before v catches up with q."""
    gap = q - v_at_touch
    if gap < -tol:
        raise InvalidParametersError(
            f"queue cannot rest on the floor with v={v_at_touch} above q={q}"
        )
    return max(gap, 0.0)


def rise_time_from_floor(b: float) -> float:
    """Time from (y=0, v=q) to y=b: the root of exp(-r) + r - 1 = b."""
    if b < 0:
        raise InvalidParametersError(f"b must be non-negative: {b}")
    if b == 0.0:
        return 0.0

    def gap(r: float) -> float:
        return e_minus_one_plus(r) - b

    hi = grow_upper_bracket(gap, 0.0, want_positive=True, label="rise from floor")
    return bracketed_root(gap, 0.0, hi, label="rise from floor")


def clipping_threshold(b: float) -> float:
    """S with (1+b+S)exp(-S) = 1.

    Starting from (y=b, v=q-S) the queue touches zero exactly at s=S.
    """
    if b < 0:
        raise InvalidParametersError(f"b must be non-negative: {b}")
    if b == 0.0:
        return 0.0

    def gap(S: float) -> float:
        return math.log1p(b + S) - S

    hi = grow_upper_bracket(gap, 0.0, want_positive=False, label="clipping threshold")
    S = bracketed_root(gap, 0.0, hi, label="clipping threshold")
    logger.debug(f"clipping threshold for b={b}: S={S}")
    return S
