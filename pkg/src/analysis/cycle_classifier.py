"""Which limit cycles exist for (beta, q, b), and with which shape.

The case split is on q against A*_{N+1} and q*_{N+1}. Orders up to N follow
the unclipped existence window A in (beta^j/(1-beta^j), A*_j]; the order-N
cycle is clipped below b_{0,N}. The order-(N+1) cycle exists only on the
band [b_lo, A*_{N+1} - q] (or its clipped counterpart capped by b_hi).
"""

import math
from typing import List, Optional, Tuple

from loguru import logger

from ..models.cycles import (
    CaseTag,
    ClassificationReport,
    CycleDescriptor,
    CycleShape,
    DerivedConstants,
    Mismatch,
    SimulatorAgreement,
    SingleJumpCondition,
)
from ..models.params import Direction, FluidParams, NormalizedParams
from ..models.simulation import SeedRule, SimConfig
from ..simulation.fluid_simulator import run
from ..utils.errors import AimdModelError, InvariantViolation
from .cycle_constants import a_star, derive_constants, window_ratio
from .limit_map import unclipped_fixed_point
from .model_core import hit_time_to_level, rise_time_from_floor, segment_minimum

CRITICAL_TOL = 1e-9
AGREEMENT_TOL = 1e-8


def _shape_by_buffer(b: float, b0: float, tol: float) -> CycleShape:
    if abs(b - b0) <= tol:
        return CycleShape.CRITICAL
    return CycleShape.CLIPPED if b < b0 else CycleShape.UNCLIPPED


def cycle_descriptor(
    beta: float, q: float, b: float, k: int, shape: CycleShape
) -> CycleDescriptor:
    """Anchor values of a k-cycle whose existence and shape are already known."""
    A = b + q

    if shape is CycleShape.CLIPPED:
        # every clipped cycle passes through (y=0, v=q)
        v_peak = q + rise_time_from_floor(b)
        v0 = beta**k * (v_peak + 1.0)
        touch = hit_time_to_level(v0, b, q, 0.0, Direction.FALLING)
        if touch is None:
            raise InvariantViolation(f"clipped {k}-cycle at b={b} never reaches y=0")
        s1 = v_peak - v0
        return CycleDescriptor(
            order=k,
            shape=shape,
            v0=v0,
            s1=s1,
            s0=None,
            y_min=0.0,
            S_cycle=s1 + 1.0,
            clip_duration=max(q - (v0 + touch), 0.0),
        )

    anchor = unclipped_fixed_point(beta, A, k)
    if anchor is None:
        raise InvariantViolation(f"unclipped {k}-cycle predicted at A={A} has no fixed point")
    v0, s1 = anchor
    s0 = segment_minimum(v0, b, q)
    y_min = v0 + s0 - q if s0 is not None else b
    return CycleDescriptor(
        order=k, shape=shape, v0=v0, s1=s1, s0=s0, y_min=y_min, S_cycle=s1 + 1.0
    )


def _case_tag(q: float, constants: DerivedConstants) -> CaseTag:
    N = constants.N
    if constants.A_star[N + 1] < q:
        return CaseTag.A_STAR_LT_Q
    if q <= constants.q_star[N + 1]:
        return CaseTag.Q_LE_QSTAR
    return CaseTag.QSTAR_LT_Q_LE_ASTAR


def _next_order_band(
    q: float, case: CaseTag, constants: DerivedConstants, flags: List[str]
) -> Optional[Tuple[float, float]]:
    """b-interval on which the (N+1)-cycle exists, if any."""
    if case is CaseTag.A_STAR_LT_Q:
        return None
    if constants.b_lo is None or constants.b_hi is None:
        if case is CaseTag.Q_LE_QSTAR:
            logger.warning(f"q={q} <= q*_(N+1) but the r-equation has no roots")
        return None

    cap = constants.A_star[constants.N + 1].finite() - q
    if case is CaseTag.Q_LE_QSTAR:
        return constants.b_lo, cap

    if math.isclose(constants.C, cap, rel_tol=0.0, abs_tol=1e-15):
        raise InvariantViolation(f"C={constants.C} coincides with A*_(N+1) - q")
    if constants.b_lo < cap < constants.b_hi:
        flags.append("next_order_cap_binding")
        logger.warning(f"b_hi={constants.b_hi} exceeds A*_(N+1)-q={cap}; using the cap")
    upper = min(constants.b_hi, cap)
    if constants.b_lo > upper:
        return None
    return constants.b_lo, upper


def classify(
    beta: float, q: float, b: float, *, critical_tol: float = CRITICAL_TOL
) -> ClassificationReport:
    params = NormalizedParams(beta=beta, q=q, b=b)
    constants = derive_constants(beta, q)
    N = constants.N
    A = params.A
    case = _case_tag(q, constants)
    flags: List[str] = []

    entries: List[Tuple[int, CycleShape]] = []
    for j in range(1, N + 1):
        if window_ratio(beta, j) < A and constants.A_star[j] >= A:
            if j < N:
                entries.append((j, CycleShape.UNCLIPPED))
            else:
                entries.append((j, _shape_by_buffer(b, constants.b0[N], critical_tol)))

    band = _next_order_band(q, case, constants, flags)
    if band is not None and band[0] <= b <= band[1]:
        if case is CaseTag.Q_LE_QSTAR:
            shape = _shape_by_buffer(b, constants.b0[N + 1], critical_tol)
        else:
            shape = CycleShape.CLIPPED
        entries.append((N + 1, shape))

    if not entries:
        raise InvariantViolation(f"no cycle predicted for beta={beta}, q={q}, b={b}")

    cycles = [cycle_descriptor(beta, q, b, k, shape) for k, shape in sorted(entries)]
    single_jump_only = len(cycles) == 1 and cycles[0].order == 1
    holds, condition = single_jump_predicate(beta, q, b, constants)
    if holds != single_jump_only:
        flags.append("single_jump_disagreement")
        logger.warning(
            f"single-jump condition {condition.value} disagrees with cycles "
            f"{[c.order for c in cycles]} at beta={beta}, q={q}, b={b}"
        )

    logger.debug(f"classified beta={beta} q={q} b={b}: case={case.value} cycles={entries}")
    return ClassificationReport(
        params=params,
        constants=constants,
        case_tag=case,
        cycles=cycles,
        single_jump_only=single_jump_only,
        pro2_condition=condition,
        coexistence_interval=band,
        flags=flags,
    )


def single_jump_predicate(
    beta: float, q: float, b: float, constants: Optional[DerivedConstants] = None
) -> Tuple[bool, SingleJumpCondition]:
    """Whether only a single cycle of order 1 exists, and by which condition."""
    c = constants if constants is not None else derive_constants(beta, q)
    ratio = beta / (1.0 - beta)
    A2 = c.A_star[2].finite()
    Q2 = c.q_star[2].finite()
    A = b + q

    if ratio >= q:
        return (True, SingleJumpCondition.A) if A > A2 else (False, SingleJumpCondition.NONE)
    if A2 < q:
        return True, SingleJumpCondition.B

    # from here on N = 1, so C, D and the r-roots refer to N = 1
    if q <= Q2:
        in_band = c.b_lo is not None and c.b_lo <= b <= A2 - q
        return (False, SingleJumpCondition.NONE) if in_band else (True, SingleJumpCondition.C)
    if q <= A2 - c.C:
        if q <= c.D:
            in_band = c.b_lo is not None and c.b_hi is not None and c.b_lo <= b <= c.b_hi
            if in_band:
                return False, SingleJumpCondition.NONE
            return True, SingleJumpCondition.D
        return True, SingleJumpCondition.E
    return True, SingleJumpCondition.F


def sufficient_condition_gap(beta: float) -> Tuple[float, float, float]:
    """(A*_2, 2beta/(1-beta), their difference)."""
    A2 = a_star(beta, 2).finite()
    legacy = 2.0 * beta / (1.0 - beta)
    return A2, legacy, legacy - A2


def sufficient_condition_gap_lower_bound(beta: float) -> float:
    e = math.exp(-(2.0 * beta + 1.0))
    return beta / (1.0 - beta**2) * (1.0 + 2.0 * beta) * (beta + 1.0) * e / (1.0 + beta * e)


def _describe(cycle: Optional[CycleDescriptor]) -> str:
    if cycle is None:
        return "none"
    return f"k={cycle.order} {cycle.shape.value} v0={cycle.v0:.12g} S={cycle.S_cycle:.12g}"


def _compare(
    expected: CycleDescriptor, observed: Optional[CycleDescriptor], tol: float
) -> List[Mismatch]:
    k = expected.order
    if observed is None:
        return [
            Mismatch(order=k, field="limit_cycle", expected=_describe(expected), observed="none")
        ]

    found: List[Mismatch] = []
    if observed.order != k:
        found.append(
            Mismatch(order=k, field="order", expected=str(k), observed=str(observed.order))
        )
    if observed.shape is not expected.shape:
        found.append(
            Mismatch(
                order=k, field="shape", expected=expected.shape.value, observed=observed.shape.value
            )
        )
    for name in ("v0", "S_cycle"):
        want, got = getattr(expected, name), getattr(observed, name)
        if abs(got - want) > tol:
            found.append(Mismatch(order=k, field=name, expected=repr(want), observed=repr(got)))
    return found


def verify_classification(
    report: ClassificationReport,
    *,
    tol: float = AGREEMENT_TOL,
    check_default_seeds: bool = True,
    max_cycles: int = 10_000,
) -> SimulatorAgreement:
    """Cross-check a report against the event-driven simulator."""
    p = report.params
    fluid = FluidParams.from_normalized(p.beta, p.q, p.b)
    mismatches: List[Mismatch] = []
    reached: List[int] = []
    runs = 0

    configs: List[Tuple[Optional[CycleDescriptor], SimConfig]] = [
        (cycle, SimConfig(params=fluid, v_init=cycle.v0, y_init=p.b, max_cycles=max_cycles))
        for cycle in report.cycles
    ]
    if check_default_seeds:
        configs += [
            (None, SimConfig.seeded(fluid, rule, max_cycles=max_cycles)) for rule in SeedRule
        ]

    for expected, cfg in configs:
        runs += 1
        try:
            result = run(cfg)
        except AimdModelError as e:
            order = expected.order if expected else 0
            mismatches.append(
                Mismatch(order=order, field="simulation", expected="converged", observed=str(e))
            )
            continue

        observed = result.limit_cycle
        if observed is not None:
            reached.append(observed.order)

        if expected is not None:
            mismatches.extend(_compare(expected, observed, tol))
        elif observed is None or all(_compare(c, observed, tol) for c in report.cycles):
            mismatches.append(
                Mismatch(
                    order=observed.order if observed else 0,
                    field="unpredicted_limit",
                    expected=", ".join(_describe(c) for c in report.cycles),
                    observed=_describe(observed),
                )
            )

    if len(report.cycles) == 2 and len(set(reached)) < 2:
        mismatches.append(
            Mismatch(
                order=0,
                field="coexistence",
                expected="two distinct limits",
                observed=str(sorted(set(reached))),
            )
        )

    if mismatches:
        logger.warning(
            f"simulator disagrees with classification at {p.echo()}: "
            f"{len(mismatches)} issue(s)"
        )
    return SimulatorAgreement(
        agrees=not mismatches, runs=runs, mismatches=mismatches, reached_orders=sorted(set(reached))
    )
