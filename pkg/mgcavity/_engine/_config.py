import dataclasses
from dataclasses import dataclass, field
from typing import Any, Self

import numpy as np

from mgcavity._market import LinearPrice, MarketModel, NoiseModel, NoNoise, PriceFunction
from mgcavity.errors import InvalidGameConfigError

SEED_MASK = (1 << 64) - 1


def default_warmup(P: int) -> int:
    return max(100 * P, 10_000)


@dataclass(frozen=True, kw_only=True)
class GameConfig:
    N: int
    P: int
    T: int
    S: int = 2
    b: float = 0.0
    price: PriceFunction = field(default_factory=LinearPrice)
    noise: NoiseModel = field(default_factory=NoNoise)
    seed: int = 0
    warmup: int = -1
    learning: bool = True
    spot_checks: int = 100

    def __post_init__(self) -> None:
        if self.warmup < 0:
            object.__setattr__(self, "warmup", default_warmup(self.P))
        self._validate()

    def _validate(self) -> None:
        if self.N < 1:
            raise InvalidGameConfigError("N", f"need at least one agent, got {self.N}")
        if self.P < 1:
            raise InvalidGameConfigError("P", f"need at least one signal, got {self.P}")
        if self.S < 2:
            raise InvalidGameConfigError("S", f"need at least two strategies per agent, got {self.S}")
        if not self.T > self.warmup >= 0:
            raise InvalidGameConfigError("T", f"need T > warmup >= 0, got T={self.T}, warmup={self.warmup}")
        if not abs(self.b) / np.sqrt(self.N) < 1:
            raise InvalidGameConfigError("b", f"|b|/sqrt(N) must be below one, got b={self.b} for N={self.N}")
        if not 0 <= self.seed <= SEED_MASK:
            raise InvalidGameConfigError("seed", f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.spot_checks < 0:
            raise InvalidGameConfigError("spot_checks", "must be non-negative")

    @property
    def alpha(self) -> float:
        return self.P / self.N

    @property
    def plus_probability(self) -> float:
        """Probability that a strategy entry is +1."""
        return 0.5 + 0.5 * self.b / np.sqrt(self.N)

    @property
    def model(self) -> MarketModel:
        return MarketModel(price=self.price, noise=self.noise)

    def replace(self, **changes: Any) -> Self:
        return dataclasses.replace(self, **changes)

    def with_seed(self, seed: int) -> Self:
        return self.replace(seed=seed)

    def to_record(self) -> dict[str, Any]:
        return {
            "N": self.N,
            "P": self.P,
            "S": self.S,
            "T": self.T,
            "b": self.b,
            "seed": self.seed,
            "warmup": self.warmup,
            "learning": self.learning,
            "price": self.price.to_record(),
            "noise": self.noise.to_record(),
        }
