"""Closed-form long-run averages of the single-jump regime and the goodput/delay frontier.

When q > A*_2 the only limit is the 1-cycle. Below the knee B = m*b_{0,1} it is
clipped: a falling arc AB from the full buffer to the empty queue, a slide BC
at y = 0 until v = q, a rising arc CD back to the full buffer, then one unit
of overflow DA and the jump. Above the knee the queue never empties and the
link runs at full rate.
"""

import math
from typing import Callable, Iterable, List, Optional, Sequence

from loguru import logger

from ..models.metrics import (
    ConstraintKind,
    ParetoOptimum,
    ParetoPoint,
    ParetoSet,
    Regime,
)
from ..models.params import Direction, FluidParams, LinkParams
from ..models.cycles import CycleShape
from ..models.simulation import SeedRule, SimConfig
from ..simulation.fluid_simulator import run as simulate
from ..utils.errors import (
    HypothesisError,
    InfeasibleConstraintError,
    InvalidParametersError,
)
from .cycle_constants import a_star, critical_buffer
from .limit_map import unclipped_fixed_point
from .model_core import hit_time_to_level, normalize, rise_time_from_floor, segment_integrals
from .roots import bracketed_root

KNEE_CONTINUITY_TOL = 1e-6
GOODPUT_TOL = 1e-12


def check_hypothesis(link: LinkParams) -> None:
    """Closed forms hold only when a single 1-cycle exists for every B."""
    A2 = a_star(link.beta, 2).finite()
    if link.q <= A2:
        raise HypothesisError(
            f"q = mu*T/m = {link.q:.6g} does not exceed A*_2 = {A2:.6g}; "
            "closed forms unavailable, use the simulator (empirical) path"
        )


def knee_buffer(link: LinkParams) -> float:
    """m * b_{0,1}: smallest buffer with full utilization."""
    return link.m * critical_buffer(link.beta, link.q, 1)


def metrics_clipped(p: FluidParams) -> ParetoPoint:
    check_hypothesis(p.link)
    n = normalize(p)
    beta, q, b = n.beta, n.q, n.b
    mu, T, m, B = p.mu, p.T, p.m, p.B
    knee = knee_buffer(p.link)
    if B > knee * (1.0 + 1e-12):
        raise HypothesisError(f"B={B} lies above the knee {knee}; the cycle is unclipped")

    S_CD = rise_time_from_floor(b)
    v_A = beta * (q + S_CD + 1.0)
    if b == 0.0:
        S_AB = 0.0
    else:
        touch = hit_time_to_level(v_A, b, q, 0.0, Direction.FALLING)
        if touch is None:
            raise HypothesisError(f"trajectory from the full buffer does not empty at B={B}")
        S_AB = touch

    ab = segment_integrals(v_A, b, q, S_AB)
    cd = segment_integrals(q, 0.0, q, S_CD)
    I = ab.int_y + cd.int_y
    J = ab.int_y2 + cd.int_y2
    top = 1.0 + q + S_CD

    T_cycle = (1.0 - beta) * top * T + B / mu + (m / mu) * I
    lambda_bar = m * (1.0 - beta**2) * top**2 / (2.0 * T_cycle)
    g_bar = (m / T_cycle) * (
        0.5 * (q + S_CD) ** 2 - 0.5 * beta**2 * top**2 + (mu * T + B) / m
    )
    x_bar = (m * T * I + (m**2 / mu) * (J + B * (mu * T + B) / m**2)) / T_cycle

    return ParetoPoint(
        B=B,
        lambda_bar=lambda_bar,
        g_bar=g_bar,
        x_bar=x_bar,
        T_cycle=T_cycle,
        regime=Regime.CLIPPED,
        S_CD=S_CD,
        S_AB=S_AB,
        v0=v_A,
    )


def metrics_unclipped(p: FluidParams) -> ParetoPoint:
    check_hypothesis(p.link)
    n = normalize(p)
    beta, q, b = n.beta, n.q, n.b
    mu, T, m, B = p.mu, p.T, p.m, p.B
    knee = knee_buffer(p.link)
    if B < knee * (1.0 - 1e-12):
        raise HypothesisError(f"B={B} lies below the knee {knee}; the cycle is clipped")

    anchor = unclipped_fixed_point(beta, n.A, 1)
    if anchor is None:
        raise HypothesisError(f"no unclipped 1-cycle at B={B}")
    v0, s1 = anchor

    seg = segment_integrals(v0, b, q, s1)
    T_cycle = T * (s1 + 1.0) + (m / mu) * (seg.int_y + b)
    lambda_bar = m / (2.0 * T_cycle) * (1.0 + beta) / (1.0 - beta) * (s1 + 1.0) ** 2
    x_bar = (
        m * T * seg.int_y + (m**2 / mu) * (seg.int_y2 + B * (mu * T + B) / m**2)
    ) / T_cycle

    return ParetoPoint(
        B=B,
        lambda_bar=lambda_bar,
        g_bar=mu,
        x_bar=x_bar,
        T_cycle=T_cycle,
        regime=Regime.UNCLIPPED,
        s1=s1,
        v0=v0,
    )


def metrics(p: FluidParams) -> ParetoPoint:
    if p.B <= knee_buffer(p.link):
        return metrics_clipped(p)
    return metrics_unclipped(p)


def empirical_metrics(p: FluidParams, max_cycles: int = 10_000) -> ParetoPoint:
    """Simulator-measured averages, for parameters outside the closed-form regime."""
    result = simulate(SimConfig.seeded(p, SeedRule.UPPER, max_cycles=max_cycles))
    cycle = result.limit_cycle
    regime = (
        Regime.CLIPPED
        if cycle is not None and cycle.shape is CycleShape.CLIPPED
        else Regime.UNCLIPPED
    )
    return ParetoPoint(
        B=p.B,
        lambda_bar=result.lambda_bar,
        g_bar=result.g_bar,
        x_bar=result.x_bar,
        T_cycle=result.T_cycle_measured,
        regime=regime,
        s1=cycle.s1 if cycle else None,
        v0=cycle.v0 if cycle else None,
        empirical=True,
    )


def pareto_point(link: LinkParams, B: float, empirical: bool = False) -> ParetoPoint:
    p = link.with_buffer(B)
    if empirical:
        return empirical_metrics(p)
    return metrics(p)


def _knee_point(link: LinkParams) -> ParetoPoint:
    knee = knee_buffer(link)
    p = link.with_buffer(knee)
    clipped = metrics_clipped(p)
    unclipped = metrics_unclipped(p)
    drift = abs(clipped.g_bar - unclipped.g_bar)
    if drift > KNEE_CONTINUITY_TOL * link.mu:
        logger.warning(f"goodput branches differ by {drift:.3g} at the knee B={knee:.6g}")
    return clipped


def pareto_sweep(
    link: LinkParams,
    buffers: Sequence[float],
    *,
    empirical: bool = False,
    map_fn: Optional[Callable[..., Iterable[ParetoPoint]]] = None,
) -> ParetoSet:
    """Average metrics along a buffer grid, in increasing B."""
    grid = sorted(float(B) for B in buffers)
    if not grid:
        raise InvalidParametersError("buffer grid is empty")
    if grid[0] < 0:
        raise InvalidParametersError(f"buffer sizes must be non-negative, got {grid[0]}")

    if not empirical:
        check_hypothesis(link)
    mapper = map_fn or map
    points: List[ParetoPoint] = list(
        mapper(pareto_point, [link] * len(grid), grid, [empirical] * len(grid))
    )
    knee = None if empirical else _knee_point(link)
    logger.info(f"pareto sweep: {len(points)} points, knee at {knee.B if knee else 'n/a'}")
    return ParetoSet(params=link, points=points, knee=knee)


def _candidates(pset: ParetoSet) -> List[ParetoPoint]:
    extra = [pset.knee] if pset.knee is not None else []
    return sorted(pset.points + extra, key=lambda pt: pt.B)


def _empirical(pset: ParetoSet) -> bool:
    return any(pt.empirical for pt in pset.points)


def max_goodput_given_delay(pset: ParetoSet, x_star: float) -> ParetoOptimum:
    """Largest goodput whose mean backlog stays at or below x_star."""
    if _empirical(pset):
        feasible = [pt for pt in pset.points if pt.x_bar <= x_star]
        if not feasible:
            raise InfeasibleConstraintError(f"no grid point has x_bar <= {x_star}")
        best = max(feasible, key=lambda pt: (pt.g_bar, -pt.x_bar))
        return ParetoOptimum(kind=ConstraintKind.DELAY_AT_MOST, threshold=x_star, point=best)

    link = pset.params
    knee = pset.knee or _knee_point(link)
    if knee.x_bar <= x_star:
        return ParetoOptimum(kind=ConstraintKind.DELAY_AT_MOST, threshold=x_star, point=knee)

    floor = metrics(link.with_buffer(0.0))
    if floor.x_bar > x_star:
        raise InfeasibleConstraintError(
            f"mean backlog {floor.x_bar:.6g} at B=0 already exceeds x* = {x_star}"
        )

    def excess(B: float) -> float:
        return metrics(link.with_buffer(B)).x_bar - x_star

    B = bracketed_root(excess, 0.0, knee.B, label="delay constraint")
    point = metrics(link.with_buffer(B))
    return ParetoOptimum(kind=ConstraintKind.DELAY_AT_MOST, threshold=x_star, point=point)


def min_delay_given_goodput(pset: ParetoSet, g_star: float) -> ParetoOptimum:
    """Smallest buffer, hence smallest backlog, reaching goodput g_star."""
    link = pset.params
    mu = link.mu
    if g_star > mu * (1.0 + GOODPUT_TOL):
        raise InfeasibleConstraintError(f"goodput {g_star} exceeds the link capacity {mu}")

    if _empirical(pset):
        feasible = [pt for pt in pset.points if pt.g_bar >= g_star]
        if not feasible:
            raise InfeasibleConstraintError(f"no grid point reaches g_bar >= {g_star}")
        best = min(feasible, key=lambda pt: pt.B)
        return ParetoOptimum(kind=ConstraintKind.GOODPUT_AT_LEAST, threshold=g_star, point=best)

    knee = pset.knee or _knee_point(link)
    if g_star >= mu * (1.0 - GOODPUT_TOL):
        return ParetoOptimum(kind=ConstraintKind.GOODPUT_AT_LEAST, threshold=g_star, point=knee)

    floor = metrics(link.with_buffer(0.0))
    if floor.g_bar >= g_star:
        return ParetoOptimum(kind=ConstraintKind.GOODPUT_AT_LEAST, threshold=g_star, point=floor)

    def shortfall(B: float) -> float:
        return metrics(link.with_buffer(B)).g_bar - g_star

    B = bracketed_root(shortfall, 0.0, knee.B, label="goodput constraint")
    point = metrics(link.with_buffer(B))
    return ParetoOptimum(kind=ConstraintKind.GOODPUT_AT_LEAST, threshold=g_star, point=point)


def weighted_optimum(pset: ParetoSet, c1: float, c2: float) -> ParetoOptimum:
    """Grid point maximizing c1*g_bar - c2*x_bar."""
    if c1 < 0 or c2 < 0:
        raise InvalidParametersError(f"weights must be non-negative: c1={c1}, c2={c2}")
    best = max(_candidates(pset), key=lambda pt: c1 * pt.g_bar - c2 * pt.x_bar)
    return ParetoOptimum(kind=ConstraintKind.WEIGHTED, weights=[c1, c2], point=best)


def excess_rate(p: FluidParams) -> float:
    """lambda_bar - mu in the unclipped regime."""
    return metrics_unclipped(p).lambda_bar - p.mu


def excess_rate_closed_form(p: FluidParams) -> float:
    """The same excess through s1 alone.

    mu(3/2 - s1/(e^s1 - 1)) / (A + s1^2/2 + v0*s1)
    """
    pt = metrics_unclipped(p)
    s1, v0 = pt.s1, pt.v0
    assert s1 is not None and v0 is not None
    A = normalize(p).A
    # s1/(e^s1 - 1) underflows to zero long before expm1 overflows
    tail = s1 / math.expm1(s1) if s1 < 700.0 else 0.0
    return p.mu * (1.5 - tail) / (A + 0.5 * s1 * s1 + v0 * s1)


def excess_rate_asymptote(p: FluidParams) -> float:
    """Leading-order excess for large s1: 3(1-beta)mu / ((1+beta) s1^2)."""
    pt = metrics_unclipped(p)
    s1 = pt.s1
    assert s1 is not None
    return 3.0 * (1.0 - p.beta) * p.mu / ((1.0 + p.beta) * s1 * s1)
