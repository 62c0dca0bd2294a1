from __future__ import annotations

import enum


class ModelVariant(str, enum.Enum):
    """Which human constraints are switched on."""

    NC = "NC"
    MC = "MC"
    VC = "VC"
    VMC = "VMC"

    @property
    def visual(self) -> bool:
        return self in (ModelVariant.VC, ModelVariant.VMC)

    @property
    def motor(self) -> bool:
        return self in (ModelVariant.MC, ModelVariant.VMC)

    @classmethod
    def parse(cls, value: "str | ModelVariant") -> "ModelVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown model variant {value!r}; expected one of NC, MC, VC, VMC") from None


class AgentKind(str, enum.Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"
