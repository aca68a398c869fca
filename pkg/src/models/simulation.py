from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .cycles import CycleDescriptor
from .params import FluidParams, State


class SeedRule(Enum):
    UPPER = "upper"
    LOWER = "lower"


class SegmentKind(Enum):
    FREE = "free"
    SLIDE = "slide"
    OVERFLOW = "overflow"


class TraceEvent(Enum):
    SEGMENT = "segment"
    HIT_B = "hit_b"
    JUMP = "jump"
    HIT_0 = "hit_0"
    SLIDE_END = "slide_end"


class Segment(BaseModel):
    """A stretch of transformed time with one closed-form law."""

    model_config = ConfigDict(frozen=True)

    kind: SegmentKind
    s_start: float
    length: float = Field(ge=0)
    v0: float
    y0: float


class SimConfig(BaseModel):
    params: FluidParams
    v_init: float = Field(gt=0)
    y_init: float = Field(ge=0)
    max_cycles: int = Field(default=10_000, ge=1)
    warmup_cycles: int = Field(default=0, ge=0)
    measure_cycles: int = Field(default=3, ge=1)
    record_trace: bool = False

    @model_validator(mode="after")
    def check_state(self) -> "SimConfig":
        # tolerate round-off from callers computing b as B/m
        if self.y_init > self.params.b * (1 + 1e-12) + 1e-15:
            raise ValueError(f"y_init={self.y_init} exceeds b={self.params.b}")
        return self

    @classmethod
    def seeded(
        cls, params: FluidParams, rule: SeedRule, offset: float = 1e-6, **kwargs: object
    ) -> "SimConfig":
        """Start on the full buffer just inside the upper or lower basin."""
        A = params.b + params.q
        v_init = A - offset if rule is SeedRule.UPPER else params.beta * A + offset
        return cls(params=params, v_init=v_init, y_init=params.b, **kwargs)


class TraceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_seconds: float
    s: float
    v: float
    y: float
    event: TraceEvent
    w: float
    x: float
    rate: float
    goodput: float


class SimResult(BaseModel):
    limit_cycle: Optional[CycleDescriptor] = None
    lambda_bar: float
    g_bar: float
    x_bar: float
    T_cycle_measured: float
    jump_multiplicities: Dict[int, int]
    converged: bool
    cycles_run: int
    transient_cycles: int
    final_state: Optional[State] = None
    trace: Optional[List[TraceRow]] = None
