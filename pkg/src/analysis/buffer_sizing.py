"""Smallest buffer giving full utilization as a function of the aggregate increment m.

With q = mu*T/m the relevant cycle order is N(q); the minimal buffer is
B_{0,N} = m * b_{0,N}. It falls towards zero as m approaches a breakpoint
m_i = mu*T(1-beta^i)/beta^i from below and jumps up when N increments there.
"""

import math
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..models.metrics import BufferCurve, BufferSample
from ..utils.errors import InvalidParametersError
from .cycle_constants import compute_N, critical_buffer, window_ratio

BREAKPOINT_OFFSET = 1e-9


def _validate(mu_T: float, beta: float) -> None:
    if not mu_T > 0 or math.isinf(mu_T):
        raise InvalidParametersError(f"mu*T must be positive and finite: {mu_T}")
    if not 0.0 < beta < 1.0:
        raise InvalidParametersError(f"beta must lie in (0, 1): {beta}")


def envelope(mu_T: float, beta: float, m: float) -> float:
    """(1-beta)^2 (mu T)^2 / (2m), the curve the local maxima approach."""
    return (1.0 - beta) ** 2 * mu_T**2 / (2.0 * m)


def breakpoint_at(mu_T: float, beta: float, i: int) -> float:
    """m_i = mu*T(1-beta^i)/beta^i, where N steps from i to i+1."""
    return mu_T * (1.0 - beta**i) / beta**i


def breakpoints(mu_T: float, beta: float, m_max: float) -> List[float]:
    """Every m_i up to m_max, i >= 1."""
    _validate(mu_T, beta)
    points: List[float] = []
    i = 1
    while True:
        m_i = breakpoint_at(mu_T, beta, i)
        if m_i > m_max or math.isinf(m_i):
            return points
        points.append(m_i)
        i += 1


def b_min(
    mu_T: float, beta: float, m: float, order: Optional[int] = None
) -> Tuple[int, float]:
    """(N, B_{0,N}) at increment m; ``order`` overrides the natural N."""
    _validate(mu_T, beta)
    if not m > 0:
        raise InvalidParametersError(f"m must be positive: {m}")
    q = mu_T / m
    N = order if order is not None else compute_N(beta, q)
    return N, m * critical_buffer(beta, q, N)


def b_min_for_connections(
    mu_T: float, beta: float, m0: float, n: int
) -> Tuple[int, float]:
    """Minimal buffer for n synchronized sources each adding m0 per RTT."""
    if n < 1:
        raise InvalidParametersError(f"connection count must be at least 1: {n}")
    return b_min(mu_T, beta, n * m0)


def curve_sample(
    mu_T: float, beta: float, m: float, order: Optional[int] = None, at_breakpoint: bool = False
) -> BufferSample:
    N, B0 = b_min(mu_T, beta, m, order)
    return BufferSample(
        m=m, N=N, B0=B0, envelope=envelope(mu_T, beta, m), breakpoint=at_breakpoint
    )


def buffer_curve(
    mu_T: float,
    beta: float,
    m_range: Tuple[float, float],
    samples: int,
    *,
    map_fn: Optional[Callable[..., Iterable[BufferSample]]] = None,
) -> BufferCurve:
    """Log-spaced samples of B_{0,N}(m) with every breakpoint inserted exactly."""
    _validate(mu_T, beta)
    m_lo, m_hi = m_range
    if not 0 < m_lo < m_hi:
        raise InvalidParametersError(f"m range must satisfy 0 < lo < hi: {m_range}")
    if samples < 2:
        raise InvalidParametersError(f"need at least two samples, got {samples}")

    grid: List[Tuple[float, Optional[int], bool]] = [
        (float(m), None, False) for m in np.geomspace(m_lo, m_hi, samples)
    ]
    cuts = [m_i for m_i in breakpoints(mu_T, beta, m_hi) if m_i >= m_lo]
    for i, m_i in enumerate(cuts):
        # index of m_i among all breakpoints; N switches to that index + 1 at m_i
        k = round(math.log(mu_T / (mu_T + m_i)) / math.log(beta))
        below = m_i * (1.0 - BREAKPOINT_OFFSET)
        if below >= m_lo:
            grid.append((below, k, True))
        grid.append((m_i, k + 1, True))
    grid.sort(key=lambda item: item[0])

    mapper = map_fn or map
    ms = [g[0] for g in grid]
    points: List[BufferSample] = list(
        mapper(
            curve_sample,
            [mu_T] * len(grid),
            [beta] * len(grid),
            ms,
            [g[1] for g in grid],
            [g[2] for g in grid],
        )
    )
    logger.info(f"buffer curve: {len(points)} samples, {len(cuts)} breakpoints")
    return BufferCurve(
        mu_T=mu_T,
        beta=beta,
        samples=points,
        breakpoints=cuts,
        witness=non_monotonicity_witness(mu_T, beta),
    )


def local_maximum(mu_T: float, beta: float, N: int) -> Tuple[float, float]:
    """(m_{N-1}, B_{0,N}(m_{N-1})), the peak reached right after a breakpoint."""
    _validate(mu_T, beta)
    if N < 2:
        raise InvalidParametersError(f"local maxima start at N = 2, got {N}")
    ratio = window_ratio(beta, N - 1).finite()
    m = mu_T / ratio
    return m, m * critical_buffer(beta, ratio, N)


def non_monotonicity_witness(mu_T: float, beta: float) -> Tuple[BufferSample, BufferSample]:
    """Samples at m_a = m_1(1 - offset) and m_b = m_1 with B_0(m_a) < B_0(m_b).

    Below m_1 the order is 1 and b_0,1 vanishes as q falls to beta/(1-beta);
    at m_1 the order is 2 and b_0,2 stays positive.
    """
    _validate(mu_T, beta)
    m_1 = breakpoint_at(mu_T, beta, 1)
    below = curve_sample(mu_T, beta, m_1 * (1.0 - BREAKPOINT_OFFSET), 1, at_breakpoint=True)
    at = curve_sample(mu_T, beta, m_1, 2, at_breakpoint=True)
    logger.debug(f"witness around m_1={m_1}: B0 {below.B0} -> {at.B0}")
    return below, at
