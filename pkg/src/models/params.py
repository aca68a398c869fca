from enum import Enum
from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class DataUnit(Enum):
    PACKETS = "packets"
    BITS = "bits"


class Direction(Enum):
    RISING = "rising"
    FALLING = "falling"


class LinkParams(BaseModel):
    """Bottleneck link and aggregate AIMD source, buffer left open."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(gt=0, description="capacity, data units per second")
    T: float = Field(gt=0, description="two-way propagation delay, seconds")
    m: float = Field(gt=0, description="aggregate increment per RTT, data units")
    beta: float = Field(gt=0, lt=1, description="multiplicative decrease factor")
    unit: DataUnit = DataUnit.PACKETS

    @field_validator("unit", mode="before")
    @classmethod
    def parse_unit(cls, v: Any) -> Any:
        if isinstance(v, str):
            return DataUnit(v.lower())
        return v

    @property
    def q(self) -> float:
        return self.mu * self.T / self.m

    def with_buffer(self, B: float) -> "FluidParams":
        return FluidParams(mu=self.mu, T=self.T, m=self.m, beta=self.beta, unit=self.unit, B=B)


class FluidParams(LinkParams):
    B: float = Field(ge=0, description="buffer size, data units")

    @property
    def b(self) -> float:
        return self.B / self.m

    @property
    def link(self) -> LinkParams:
        return LinkParams(mu=self.mu, T=self.T, m=self.m, beta=self.beta, unit=self.unit)

    @classmethod
    def from_normalized(cls, beta: float, q: float, b: float) -> "FluidParams":
        """Canonical physical record for a normalized triple (mu = m = 1)."""
        return cls(mu=1.0, T=q, m=1.0, beta=beta, B=b)

    def scaled(self, factor: float) -> "FluidParams":
        """Scale capacity, increment and buffer together."""
        return self.model_copy(
            update={"mu": self.mu * factor, "m": self.m * factor, "B": self.B * factor}
        )


class NormalizedParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: float = Field(gt=0, lt=1)
    q: float = Field(gt=0)
    b: float = Field(ge=0)

    @model_validator(mode="after")
    def check_finite(self) -> "NormalizedParams":
        if self.q == float("inf") or self.b == float("inf"):
            raise ValueError("q and b must be finite")
        return self

    @property
    def A(self) -> float:
        return self.b + self.q

    def echo(self) -> Dict[str, float]:
        return {"beta": self.beta, "q": self.q, "b": self.b, "A": self.A}


class State(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: float = Field(ge=0)
    v: float
    y: float


class JumpResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    v_after: float
    k: int = Field(ge=1)
