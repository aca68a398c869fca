"""Bracketed scalar root finding shared by every solver in the package.

All equations of the model are smooth and monotone (or unimodal) on the
intervals the callers construct, so a sign-changing bracket plus Brent's
method is enough; nothing here does unbracketed Newton steps.
"""

import math
from typing import Callable, Dict, Optional

import numpy as np
from loguru import logger
from scipy.optimize import brentq

from ..utils.errors import RootFindingError

XTOL = 1e-13
RTOL = 4 * float(np.finfo(float).eps)
MAX_ITERATIONS = 200
MAX_DOUBLINGS = 1100

_settings: Dict[str, float] = {"xtol": XTOL, "maxiter": MAX_ITERATIONS}

ScalarFunction = Callable[[float], float]


def bracketed_root(
    func: ScalarFunction,
    lo: float,
    hi: float,
    *,
    xtol: Optional[float] = None,
    maxiter: Optional[int] = None,
    label: str = "root",
) -> float:
    """Brent's method on [lo, hi]; the endpoints must straddle a sign change."""
    xtol = _settings["xtol"] if xtol is None else xtol
    maxiter = int(_settings["maxiter"] if maxiter is None else maxiter)
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise RootFindingError(
            f"{label}: no sign change on [{lo!r}, {hi!r}] (f={f_lo!r}, {f_hi!r})"
        )

    root, info = brentq(
        func, lo, hi, xtol=xtol, rtol=RTOL, maxiter=maxiter, full_output=True, disp=False
    )
    if not info.converged:
        raise RootFindingError(f"{label}: Brent did not converge after {info.iterations} steps")

    logger.trace(f"{label}: root={root!r} after {info.iterations} iterations")
    return float(root)


def configure_solver(xtol: float = XTOL, max_iterations: int = MAX_ITERATIONS) -> None:
    """Process-wide defaults for bracketed_root."""
    _settings["xtol"] = xtol
    _settings["maxiter"] = max_iterations


def grow_upper_bracket(
    func: ScalarFunction,
    start: float,
    *,
    want_positive: bool,
    step: float = 1.0,
    label: str = "bracket",
) -> float:
    """Return a point above ``start`` where ``func`` has the wanted sign.

    The offset from ``start`` doubles each time, beginning at ``step``.
    """
    offset = step
    for _ in range(MAX_DOUBLINGS):
        x = start + offset
        value = func(x)
        if (value > 0) if want_positive else (value < 0):
            return x
        offset *= 2.0
        if math.isinf(start + offset):
            break
    raise RootFindingError(f"{label}: upper bracket not found above {start!r}")


def positive_root_after_origin(
    func: ScalarFunction, *, label: str = "positive root", floor: float = 1e-300
) -> Optional[float]:
    """Unique positive root of a function with f(0)=0, f>0 just right of 0, f->-inf.

    Returns None when no point with f>0 can be found, which happens exactly
    when the slope at the origin is not positive (the root has merged with 0).
    """
    hi = grow_upper_bracket(func, 0.0, want_positive=False, label=label)

    lo = hi / 2.0
    while True:
        f_lo = func(lo)
        if f_lo > 0.0:
            break
        if f_lo < 0.0:
            hi = lo
        lo /= 2.0
        if lo < floor:
            logger.debug(f"{label}: no positive part near the origin")
            return None

    return bracketed_root(func, lo, hi, label=label)


def e_minus_one_plus(x: float) -> float:
    """exp(-x) - 1 + x without cancellation for small x."""
    if abs(x) < 1e-3:
        return x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)))
    return math.expm1(-x) + x


def one_minus_exp(x: float) -> float:
    """1 - exp(-x)."""
    return -math.expm1(-x)
