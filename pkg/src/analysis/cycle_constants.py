import math
from typing import Dict, NamedTuple, Optional, Tuple

from loguru import logger

from ..models.cycles import DerivedConstants
from ..models.extended import ExtendedReal
from ..utils.errors import ConvergenceError, NoCriticalCycleError, RootFindingError
from .roots import (
    bracketed_root,
    e_minus_one_plus,
    grow_upper_bracket,
    one_minus_exp,
    positive_root_after_origin,
)

DOUBLE_ROOT_TOL = 1e-12


class RRoots(NamedTuple):
    r_lo: float
    r_hi: float
    b_lo: float
    b_hi: float


def window_ratio(beta: float, k: int) -> ExtendedReal:
    """beta^k / (1 - beta^k), unbounded for k = 0."""
    if k <= 0:
        return ExtendedReal.unbounded()
    bk = beta**k
    return ExtendedReal.of(bk / (1.0 - bk))


def gamma_minus_one(theta: float) -> float:
    """theta/(1 - exp(-theta)) - 1, accurate near zero."""
    if theta == 0.0:
        return 0.0
    return e_minus_one_plus(theta) / one_minus_exp(theta)


def log_gamma(theta: float) -> float:
    """ln(theta / (1 - exp(-theta)))."""
    return math.log1p(gamma_minus_one(theta))


def compute_N(beta: float, q: float) -> int:
    """Smallest i >= 1 with beta^i/(1-beta^i) < q."""
    cap = max(1, math.ceil(math.log(q / (1.0 + q)) / math.log(beta))) + 5
    i = 1
    while True:
        bi = beta**i
        if bi / (1.0 - bi) < q:
            return i
        i += 1
        if i > cap:
            raise ConvergenceError(f"N search exceeded {cap} steps (beta={beta}, q={q})")


def compute_D_C(beta: float, N: int) -> Tuple[float, float]:
    bN = beta**N
    log_term = math.log1p(-bN)
    D = log_term + 2.0 * bN / (1.0 - bN)
    C = -log_term - bN
    return D, C


def solve_theta(beta: float, q: float, k: int) -> float:
    """Positive root of ln(theta/(1-e^-theta)) + a*theta = q - a, a = beta^k/(1-beta^k)."""
    bk = beta**k
    a = bk / (1.0 - bk)
    if q <= a:
        raise NoCriticalCycleError(
            f"no critical {k}-cycle: q={q} does not exceed beta^k/(1-beta^k)={a}"
        )
    target = q - a

    def h(theta: float) -> float:
        return log_gamma(theta) + a * theta - target

    hi = grow_upper_bracket(h, 0.0, want_positive=True, label=f"theta_{k}")
    return bracketed_root(h, 0.0, hi, label=f"theta_{k}")


def b0_of_theta(theta: float) -> float:
    """gamma - ln(gamma) - 1 with gamma = theta/(1-e^-theta)."""
    x = gamma_minus_one(theta)
    if x < 1e-4:
        return x * x * (0.5 - x * (1.0 / 3.0 - x / 4.0))
    return x - math.log1p(x)


def critical_buffer(beta: float, q: float, k: int) -> float:
    """b_{0,k}: normalized buffer of the critical k-cycle."""
    return b0_of_theta(solve_theta(beta, q, k))


def tau_alpha(beta: float, k: int) -> float:
    return (beta ** (k - 1) - beta**k) / (1.0 - beta**k)


def solve_tau(beta: float, k: int) -> ExtendedReal:
    if k < 2:
        return ExtendedReal.unbounded()
    alpha = tau_alpha(beta, k)

    # tau = (1 + alpha(tau+1))(1 - e^-tau), rearranged to avoid cancellation
    def F(tau: float) -> float:
        return alpha * (tau + 1.0) * one_minus_exp(tau) - e_minus_one_plus(tau)

    tau = positive_root_after_origin(F, label=f"tau_{k}")
    if tau is None:
        raise RootFindingError(f"tau_{k} has no positive root (beta={beta}, alpha={alpha})")
    return ExtendedReal.of(tau)


def a_star(beta: float, k: int, tau: Optional[ExtendedReal] = None) -> ExtendedReal:
    if k < 2:
        return ExtendedReal.unbounded()
    t = (tau if tau is not None else solve_tau(beta, k)).finite()
    return ExtendedReal.of(beta ** (k - 1) * (t + 1.0) / (1.0 - beta**k))


def q_star(beta: float, k: int, tau: Optional[ExtendedReal] = None) -> ExtendedReal:
    if k < 2:
        return ExtendedReal.unbounded()
    t = (tau if tau is not None else solve_tau(beta, k)).finite()
    bk = beta**k
    return ExtendedReal.of(bk * (t + 1.0) / (1.0 - bk) + log_gamma(t))


def r_gap(beta: float, q: float, N: int, r: float) -> float:
    """Delta(r) = e^-r + r - 1 + q - beta^N (q + r + 1)."""
    return e_minus_one_plus(r) + q - beta**N * (q + r + 1.0)


def solve_r_roots(beta: float, q: float, N: int) -> Optional[RRoots]:
    bN = beta**N
    D, C = compute_D_C(beta, N)
    r_min = -math.log1p(-bN)
    gap_min = (1.0 - bN) * (q - D)

    if gap_min > DOUBLE_ROOT_TOL:
        return None
    if abs(gap_min) <= DOUBLE_ROOT_TOL:
        logger.debug(f"double root of the r-equation at q=D={D}")
        return RRoots(r_min, r_min, C, C)

    def delta(r: float) -> float:
        return r_gap(beta, q, N, r)

    r_lo = bracketed_root(delta, 0.0, r_min, label="r_lo")
    hi = grow_upper_bracket(delta, r_min, want_positive=True, label="r_hi")
    r_hi = bracketed_root(delta, r_min, hi, label="r_hi")
    return RRoots(r_lo, r_hi, e_minus_one_plus(r_lo), e_minus_one_plus(r_hi))


def derive_constants(beta: float, q: float) -> DerivedConstants:
    """Every threshold the case analysis needs for (beta, q)."""
    N = compute_N(beta, q)
    D, C = compute_D_C(beta, N)

    theta: Dict[int, float] = {}
    b0: Dict[int, float] = {}
    for k in (N, N + 1):
        theta[k] = solve_theta(beta, q, k)
        b0[k] = b0_of_theta(theta[k])

    tau: Dict[int, ExtendedReal] = {}
    A_star: Dict[int, ExtendedReal] = {}
    Q_star: Dict[int, ExtendedReal] = {}
    for k in range(1, N + 2):
        tau[k] = solve_tau(beta, k)
        A_star[k] = a_star(beta, k, tau[k])
        Q_star[k] = q_star(beta, k, tau[k])

    roots = solve_r_roots(beta, q, N)
    logger.debug(f"constants beta={beta} q={q}: N={N} D={D:.6g} C={C:.6g} b0={b0}")

    return DerivedConstants(
        beta=beta,
        q=q,
        N=N,
        D=D,
        C=C,
        theta=theta,
        b0=b0,
        tau=tau,
        A_star=A_star,
        q_star=Q_star,
        r_lo=roots.r_lo if roots else None,
        r_hi=roots.r_hi if roots else None,
        b_lo=roots.b_lo if roots else None,
        b_hi=roots.b_hi if roots else None,
    )
