import math
import re
from typing import List, Optional, Tuple

from ..models.metrics import ConstraintKind
from .errors import InvalidParametersError


class ParameterValidator:
    """Validate model parameters before they reach the solvers."""

    MIN_BETA = 0.01
    MAX_BETA = 0.99

    @staticmethod
    def validate_beta(beta: float) -> Tuple[bool, Optional[str]]:
        """Validate beta and return (is_valid, error_message)"""
        if not math.isfinite(beta):
            return False, "beta must be a finite number"
        if not ParameterValidator.MIN_BETA <= beta <= ParameterValidator.MAX_BETA:
            return (
                False,
                f"beta must lie in [{ParameterValidator.MIN_BETA}, "
                f"{ParameterValidator.MAX_BETA}], got {beta}",
            )
        return True, None

    @staticmethod
    def validate_positive(name: str, value: float) -> Tuple[bool, Optional[str]]:
        if not math.isfinite(value) or value <= 0:
            return False, f"{name} must be a positive finite number, got {value}"
        return True, None

    @staticmethod
    def validate_non_negative(name: str, value: float) -> Tuple[bool, Optional[str]]:
        if not math.isfinite(value) or value < 0:
            return False, f"{name} must be a non-negative finite number, got {value}"
        return True, None

    @staticmethod
    def validate_normalized(beta: float, q: float, b: float) -> Tuple[bool, Optional[str]]:
        for ok, error in (
            ParameterValidator.validate_beta(beta),
            ParameterValidator.validate_positive("q", q),
            ParameterValidator.validate_non_negative("b", b),
        ):
            if not ok:
                return ok, error
        return True, None

    @staticmethod
    def validate_physical(
        mu: float, rtt: float, m: float, beta: float, buffer: Optional[float] = None
    ) -> Tuple[bool, Optional[str]]:
        checks = [
            ParameterValidator.validate_positive("mu", mu),
            ParameterValidator.validate_positive("rtt", rtt),
            ParameterValidator.validate_positive("m", m),
            ParameterValidator.validate_beta(beta),
        ]
        if buffer is not None:
            checks.append(ParameterValidator.validate_non_negative("buffer", buffer))
        for ok, error in checks:
            if not ok:
                return ok, error
        return True, None

    @staticmethod
    def require(result: Tuple[bool, Optional[str]]) -> None:
        """Raise InvalidParametersError for a failed (is_valid, error_message) pair."""
        ok, error = result
        if not ok:
            raise InvalidParametersError(error or "invalid parameters")


class ConstraintParser:
    """Parse Pareto constraints such as ``gbar>=0.95mu`` or ``xbar<=120``."""

    PATTERN = re.compile(
        r"^\s*(?P<metric>gbar|xbar)\s*(?P<op>>=|<=)\s*(?P<value>[0-9.eE+-]+)\s*(?P<mu>mu)?\s*$"
    )

    @staticmethod
    def validate_constraint(text: str) -> Tuple[bool, Optional[str]]:
        """Validate constraint text and return (is_valid, error_message)"""
        match = ConstraintParser.PATTERN.match(text or "")
        if not match:
            return False, f"constraint must look like 'gbar>=X[mu]' or 'xbar<=Y', got {text!r}"

        metric, op = match.group("metric"), match.group("op")
        if (metric, op) not in (("gbar", ">="), ("xbar", "<=")):
            return False, f"unsupported constraint direction {metric}{op}"
        if metric == "xbar" and match.group("mu"):
            return False, "a backlog bound cannot be expressed as a multiple of mu"
        try:
            value = float(match.group("value"))
        except ValueError:
            return False, f"constraint value is not a number: {match.group('value')!r}"
        if not math.isfinite(value) or value < 0:
            return False, f"constraint value must be finite and non-negative: {value}"
        return True, None

    @staticmethod
    def parse(text: str, mu: float) -> Tuple[ConstraintKind, float]:
        """(kind, threshold in physical units)."""
        ParameterValidator.require(ConstraintParser.validate_constraint(text))
        match = ConstraintParser.PATTERN.match(text)
        assert match is not None
        value = float(match.group("value"))
        if match.group("mu"):
            value *= mu
        if match.group("metric") == "gbar":
            return ConstraintKind.GOODPUT_AT_LEAST, value
        return ConstraintKind.DELAY_AT_MOST, value


class RangeParser:
    """Parse ``lo:hi`` ranges given on the command line."""

    @staticmethod
    def validate_range(text: str) -> Tuple[bool, Optional[str]]:
        parts = re.split(r"[:,]", text.strip()) if text else []
        if len(parts) != 2:
            return False, f"range must look like 'lo:hi', got {text!r}"
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError:
            return False, f"range bounds must be numbers, got {text!r}"
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return False, "range bounds must be finite"
        if not 0 < lo < hi:
            return False, f"range must satisfy 0 < lo < hi, got {lo}:{hi}"
        return True, None

    @staticmethod
    def parse(text: str) -> Tuple[float, float]:
        ParameterValidator.require(RangeParser.validate_range(text))
        lo, hi = re.split(r"[:,]", text.strip())
        return float(lo), float(hi)

    @staticmethod
    def parse_counts(text: str) -> List[int]:
        """Integer range ``lo:hi`` expanded inclusively, e.g. connection counts."""
        lo, hi = RangeParser.parse(text)
        if lo != int(lo) or hi != int(hi):
            raise InvalidParametersError(f"connection counts must be integers, got {text!r}")
        return list(range(int(lo), int(hi) + 1))
