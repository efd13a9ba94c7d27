from dataclasses import dataclass
from typing import Any

from mgcavity._market._noise import NoiseModel, NoNoise
from mgcavity._market._price import LinearPrice, PriceFunction


@dataclass(frozen=True, kw_only=True)
class MarketModel:
    """The market primitives shared by the simulator and the stationary-state solver."""

    price: PriceFunction
    noise: NoiseModel

    @classmethod
    def linear(cls) -> "MarketModel":
        return cls(price=LinearPrice(), noise=NoNoise())

    def to_record(self) -> dict[str, Any]:
        return {"price": self.price.to_record(), "noise": self.noise.to_record()}
