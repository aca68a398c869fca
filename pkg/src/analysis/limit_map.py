import math
from collections import deque
from typing import Deque, Dict, NamedTuple, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict

from ..models.params import Direction, NormalizedParams
from ..utils.errors import ConvergenceError, InvalidParametersError
from .model_core import (
    TOUCH_TOL,
    hit_time_to_level,
    jump,
    rise_time_from_floor,
    slide_on_floor,
)
from .roots import bracketed_root, e_minus_one_plus, one_minus_exp, positive_root_after_origin

CONVERGENCE_GAP = 1e-12
MAX_MAP_ITERATIONS = 10_000
STABLE_ORDER_STEPS = 3

_settings: Dict[str, float] = {"gap": CONVERGENCE_GAP, "max_iterations": MAX_MAP_ITERATIONS}


class ReturnMapContext(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: NormalizedParams
    K: int
    d: Optional[float] = None
    V1: Optional[float] = None
    V2: Optional[float] = None

    @property
    def A(self) -> float:
        return self.params.A

    @property
    def lower_end(self) -> float:
        return self.params.beta * self.params.A


class MapStep(NamedTuple):
    v1: float
    k: int
    clipped: bool


def compute_K(beta: float, A: float) -> int:
    """Smallest i >= 1 with beta^i < A/(1+A)."""
    threshold = A / (1.0 + A)
    k = 1
    while beta**k >= threshold:
        k += 1
    return k


def unclipped_fixed_point(beta: float, A: float, k: int) -> Optional[Tuple[float, float]]:
    """(v0, s1) of the unclipped k-cycle, or None when it does not exist.

    s1 is the positive root of (1 + A - v0)(1 - e^-s) = s with
    v0 = beta^k (s+1)/(1-beta^k); the cycle exists when that root exists
    and the anchor lands in [beta*A, A).
    """
    bk = beta**k
    a = bk / (1.0 - bk)
    if A <= a:
        return None

    def F(s: float) -> float:
        return (A - a * (s + 1.0)) * one_minus_exp(s) - e_minus_one_plus(s)

    s1 = positive_root_after_origin(F, label=f"return time k={k}")
    if s1 is None:
        return None
    v0 = a * (s1 + 1.0)
    if v0 < beta * A * (1.0 - 1e-12):
        return None
    return v0, s1


def return_time(v0: float, ctx: ReturnMapContext) -> float:
    """s*: time from (y=b, v0) back to y=b, ignoring the floor."""
    p = ctx.params
    s_star = hit_time_to_level(v0, p.b, p.q, p.b, Direction.RISING)
    if s_star is None:
        raise ConvergenceError(f"trajectory from v0={v0} never returns to y=b")
    return s_star


def phi_k(v0: float, k: int, ctx: ReturnMapContext) -> float:
    """beta^k (v0 + s* + 1)."""
    return ctx.params.beta**k * (v0 + return_time(v0, ctx) + 1.0)


def varphi(v0: float, ctx: ReturnMapContext) -> MapStep:
    """Full one-cycle map from (y=b, v0) including sliding on the empty queue."""
    p = ctx.params
    touch = hit_time_to_level(v0, p.b, p.q, 0.0, Direction.FALLING)

    if touch is not None:
        slide = slide_on_floor(v0 + touch, p.q)
        v_peak = p.q + rise_time_from_floor(p.b)
        clipped = slide > TOUCH_TOL
    else:
        v_peak = v0 + return_time(v0, ctx)
        clipped = False

    result = jump(v_peak + 1.0, p.A, p.beta)
    return MapStep(result.v_after, result.k, clipped)


def find_basin_boundary(ctx: ReturnMapContext) -> Optional[float]:
    """d with Phi^K(d) = A, or None when d falls below beta*A."""
    A = ctx.A
    lo = ctx.lower_end

    def f(v: float) -> float:
        return phi_k(v, ctx.K, ctx) - A

    f_lo = f(lo)
    if f_lo < 0.0:
        return None
    if f_lo == 0.0:
        return lo
    return bracketed_root(f, lo, A, label="basin boundary")


def build_context(params: NormalizedParams) -> ReturnMapContext:
    K = compute_K(params.beta, params.A)
    ctx = ReturnMapContext(params=params, K=K)
    d = find_basin_boundary(ctx)

    upper = unclipped_fixed_point(params.beta, params.A, K)
    V2 = upper[0] if upper else None
    V1 = None
    if d is not None:
        lower = unclipped_fixed_point(params.beta, params.A, K + 1)
        if lower is None:
            logger.warning(f"basin boundary d={d} found but no order-{K + 1} fixed point")
        else:
            V1 = lower[0]

    logger.debug(f"return map context: K={K} d={d} V1={V1} V2={V2}")
    return ctx.model_copy(update={"d": d, "V1": V1, "V2": V2})


def configure_map(
    convergence_gap: float = CONVERGENCE_GAP, max_map_iterations: int = MAX_MAP_ITERATIONS
) -> None:
    """Process-wide defaults for limit_value."""
    _settings["gap"] = convergence_gap
    _settings["max_iterations"] = max_map_iterations


def limit_value(
    v0: float,
    ctx: ReturnMapContext,
    *,
    gap: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> Tuple[float, int]:
    """Iterate the full map to its limit; returns (V, order).

    v0 is the window at a full queue. Values at or above A are jumped into
    [beta*A, A) first; values below beta*A are rejected.
    """
    gap = _settings["gap"] if gap is None else gap
    max_iterations = int(_settings["max_iterations"] if max_iterations is None else max_iterations)
    p = ctx.params
    if not v0 >= ctx.lower_end * (1.0 - 1e-12):
        raise InvalidParametersError(
            f"start window {v0} lies below beta*A = {ctx.lower_end}"
        )
    v = v0
    if v >= p.A:
        v = jump(v, p.A, p.beta).v_after

    tail: Deque[float] = deque([v], maxlen=12)
    prev_k = 0
    stable = 0
    for _ in range(max_iterations):
        step = varphi(v, ctx)
        moved = abs(step.v1 - v)
        stable = stable + 1 if step.k == prev_k else 1
        prev_k = step.k
        v = step.v1
        tail.append(v)
        if moved < gap * max(1.0, abs(v)) and stable >= STABLE_ORDER_STEPS:
            return v, step.k

    raise ConvergenceError(
        f"map iterates did not settle within {max_iterations} steps from v0={v0}",
        tail=list(tail),
    )


def empirical_basin_boundary(ctx: ReturnMapContext, tol: float = 1e-10) -> Optional[float]:
    """Initial condition separating limits of different order, by bisection."""
    lo = ctx.lower_end
    hi = ctx.A * (1.0 - 1e-9)
    order_lo = limit_value(lo, ctx)[1]
    order_hi = limit_value(hi, ctx)[1]
    if order_lo == order_hi:
        return None

    while hi - lo > tol * max(1.0, ctx.A):
        mid = 0.5 * (lo + hi)
        if limit_value(mid, ctx)[1] == order_lo:
            lo = mid
        else:
            hi = mid
    boundary = 0.5 * (lo + hi)
    if ctx.d is not None and not math.isclose(boundary, ctx.d, rel_tol=1e-6):
        logger.info(f"empirical basin boundary {boundary} differs from d={ctx.d}")
    return boundary
