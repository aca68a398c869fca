import math
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, model_serializer, model_validator

Number = Union[float, int, "ExtendedReal"]


class ExtendedReal(BaseModel):
    """A real number or +inf, kept as an explicit variant.

    ``value is None`` is the unbounded case. Comparisons accept plain
    numbers so case analysis can branch on ``A_star < q`` directly.
    """

    model_config = ConfigDict(frozen=True)

    value: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: object) -> object:
        if isinstance(data, str) and data.lower() in ("inf", "+inf"):
            return {"value": None}
        if isinstance(data, (int, float)):
            return {"value": None if math.isinf(data) else float(data)}
        return data

    @classmethod
    def unbounded(cls) -> "ExtendedReal":
        return cls(value=None)

    @classmethod
    def of(cls, value: float) -> "ExtendedReal":
        if math.isinf(value) and value > 0:
            return cls.unbounded()
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"ExtendedReal cannot hold {value}")
        return cls(value=float(value))

    @property
    def is_unbounded(self) -> bool:
        return self.value is None

    def finite(self) -> float:
        if self.value is None:
            raise ValueError("value is unbounded")
        return self.value

    def __float__(self) -> float:
        return math.inf if self.value is None else self.value

    @staticmethod
    def _key(other: Number) -> float:
        return float(other)

    def __lt__(self, other: Number) -> bool:
        return float(self) < self._key(other)

    def __le__(self, other: Number) -> bool:
        return float(self) <= self._key(other)

    def __gt__(self, other: Number) -> bool:
        return float(self) > self._key(other)

    def __ge__(self, other: Number) -> bool:
        return float(self) >= self._key(other)

    def __repr__(self) -> str:
        return "ExtendedReal(inf)" if self.value is None else f"ExtendedReal({self.value!r})"

    @model_serializer
    def _serialize(self) -> Union[float, str]:
        return "inf" if self.value is None else self.value
