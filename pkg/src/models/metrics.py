from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .params import LinkParams


class Regime(Enum):
    CLIPPED = "clipped"
    UNCLIPPED = "unclipped"


class ParetoPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    B: float
    lambda_bar: float
    g_bar: float
    x_bar: float
    T_cycle: float
    regime: Regime
    S_CD: Optional[float] = None
    S_AB: Optional[float] = None
    s1: Optional[float] = None
    v0: Optional[float] = None
    empirical: bool = False


class ParetoSet(BaseModel):
    params: LinkParams
    points: List[ParetoPoint]
    knee: Optional[ParetoPoint] = None

    @property
    def buffers(self) -> List[float]:
        return [p.B for p in self.points]


class ConstraintKind(Enum):
    GOODPUT_AT_LEAST = "gbar>="
    DELAY_AT_MOST = "xbar<="
    WEIGHTED = "weighted"


class ParetoOptimum(BaseModel):
    kind: ConstraintKind
    threshold: Optional[float] = None
    weights: Optional[List[float]] = None
    point: ParetoPoint


class BufferSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: float
    N: int = Field(ge=1)
    B0: float
    envelope: float
    breakpoint: bool = False


class BufferCurve(BaseModel):
    mu_T: float
    beta: float
    samples: List[BufferSample]
    breakpoints: List[float]
    witness: Optional[Tuple[BufferSample, BufferSample]] = None

    def envelope(self, m: float) -> float:
        return (1.0 - self.beta) ** 2 * self.mu_T**2 / (2.0 * m)
