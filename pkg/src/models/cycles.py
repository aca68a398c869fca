from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .extended import ExtendedReal
from .params import NormalizedParams


class CycleShape(Enum):
    CLIPPED = "clipped"
    CRITICAL = "critical"
    UNCLIPPED = "unclipped"


class CaseTag(Enum):
    A_STAR_LT_Q = "A_star_lt_q"
    Q_LE_QSTAR = "q_le_qstar"
    QSTAR_LT_Q_LE_ASTAR = "qstar_lt_q_le_Astar"


class SingleJumpCondition(Enum):
    A = "a"
    B = "b"
    C = "c"
    D = "d"
    E = "e"
    F = "f"
    NONE = "none"


class DerivedConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float
    q: float
    N: int = Field(ge=1)
    D: float
    C: float
    theta: Dict[int, float]
    b0: Dict[int, float]
    tau: Dict[int, ExtendedReal]
    A_star: Dict[int, ExtendedReal]
    q_star: Dict[int, ExtendedReal]
    r_lo: Optional[float] = None
    r_hi: Optional[float] = None
    b_lo: Optional[float] = None
    b_hi: Optional[float] = None

    def table_rows(self) -> List[Tuple[str, str]]:
        """Flat (name, value) rows for display."""
        rows = [("N", str(self.N)), ("D", f"{self.D:.6g}"), ("C", f"{self.C:.6g}")]
        for k in sorted(self.A_star):
            rows.append((f"A*_{k}", _fmt(self.A_star[k])))
            rows.append((f"q*_{k}", _fmt(self.q_star[k])))
        for k in sorted(self.b0):
            rows.append((f"b0,{k}", f"{self.b0[k]:.6g}"))
        rows.append(("b_lo", "-" if self.b_lo is None else f"{self.b_lo:.6g}"))
        rows.append(("b_hi", "-" if self.b_hi is None else f"{self.b_hi:.6g}"))
        return rows


def _fmt(value: ExtendedReal) -> str:
    return "inf" if value.is_unbounded else f"{value.finite():.6g}"


class CycleDescriptor(BaseModel):
    model_config = ConfigDict(frozen=True)

    order: int = Field(ge=1)
    shape: CycleShape
    v0: float
    s1: float
    s0: Optional[float] = None
    y_min: float
    S_cycle: float
    clip_duration: float = 0.0


class ClassificationReport(BaseModel):
    params: NormalizedParams
    constants: DerivedConstants
    case_tag: CaseTag
    cycles: List[CycleDescriptor]
    single_jump_only: bool
    pro2_condition: SingleJumpCondition
    coexistence_interval: Optional[Tuple[float, float]] = None
    flags: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_cycles(self) -> "ClassificationReport":
        if not 1 <= len(self.cycles) <= 2:
            raise ValueError(f"expected one or two cycles, got {len(self.cycles)}")
        if len(self.cycles) == 2:
            orders = sorted(c.order for c in self.cycles)
            if orders[1] - orders[0] != 1:
                raise ValueError(f"coexisting cycle orders must be consecutive: {orders}")
        return self

    @property
    def orders(self) -> List[int]:
        return [c.order for c in self.cycles]

    def cycle_of_order(self, k: int) -> Optional[CycleDescriptor]:
        for cycle in self.cycles:
            if cycle.order == k:
                return cycle
        return None


class Mismatch(BaseModel):
    order: int
    field: str
    expected: str
    observed: str


class SimulatorAgreement(BaseModel):
    agrees: bool
    runs: int
    mismatches: List[Mismatch] = Field(default_factory=list)
    reached_orders: List[int] = Field(default_factory=list)
