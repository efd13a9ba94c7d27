from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum, unique
from typing import Any, override

import numpy as np
from numpy.typing import NDArray

from mgcavity.errors import InvalidNoiseModelError


@unique
class NoiseKind(StrEnum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    DISCRETE = "discrete"


@dataclass(frozen=True, kw_only=True)
class NoiseMixture:
    """A zero-mean noise written as a weighted sum of point shifts convolved with one centred Gaussian."""

    shifts: NDArray[np.float64]
    weights: NDArray[np.float64]
    gaussian_variance: float


class NoiseModel(ABC):
    kind: NoiseKind

    @abstractmethod
    def variance(self) -> float: ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any: ...

    @abstractmethod
    def mixture(self) -> NoiseMixture: ...

    @abstractmethod
    def to_record(self) -> dict[str, Any]: ...

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.variance()))

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.to_record()}>"


class NoNoise(NoiseModel):
    kind = NoiseKind.NONE

    @override
    def variance(self) -> float:
        return 0.0

    @override
    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        if size is None:
            return 0.0
        return np.zeros(size, dtype=np.float64)

    @override
    def mixture(self) -> NoiseMixture:
        return NoiseMixture(shifts=np.zeros(1), weights=np.ones(1), gaussian_variance=0.0)

    @override
    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind.value}


class GaussianNoise(NoiseModel):
    kind = NoiseKind.GAUSSIAN

    def __init__(self, sigma: float) -> None:
        if not (np.isfinite(sigma) and sigma >= 0):
            raise InvalidNoiseModelError(f"sigma must be a finite non-negative number, got {sigma!r}")
        self._sigma = float(sigma)

    @override
    def variance(self) -> float:
        return self._sigma**2

    @override
    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        if size is None:
            return float(rng.normal(0.0, self._sigma))
        return rng.normal(0.0, self._sigma, size=size)

    @override
    def mixture(self) -> NoiseMixture:
        return NoiseMixture(shifts=np.zeros(1), weights=np.ones(1), gaussian_variance=self.variance())

    @override
    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "sigma": self._sigma}


class DiscreteNoise(NoiseModel):
    """Finite-support noise. The support is shifted at construction so that the mean is exactly zero."""

    kind = NoiseKind.DISCRETE

    def __init__(self, values: Sequence[float], probabilities: Sequence[float]) -> None:
        support = np.asarray(values, dtype=np.float64)
        probs = np.asarray(probabilities, dtype=np.float64)
        if support.ndim != 1 or support.shape != probs.shape or support.size == 0:
            raise InvalidNoiseModelError("values and probabilities must be two non-empty sequences of equal length")
        if np.any(probs < 0) or not np.all(np.isfinite(support)):
            raise InvalidNoiseModelError("probabilities must be non-negative and values finite")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise InvalidNoiseModelError(f"probabilities must sum to one, got {total!r}")
        probs = probs / total
        self._probabilities = probs
        self._values = support - float(probs @ support)

    @property
    def values(self) -> NDArray[np.float64]:
        return self._values

    @property
    def probabilities(self) -> NDArray[np.float64]:
        return self._probabilities

    @override
    def variance(self) -> float:
        return float(self._probabilities @ self._values**2)

    @override
    def sample(self, rng: np.random.Generator, size: int | None = None) -> Any:
        drawn = rng.choice(self._values, size=size, p=self._probabilities)
        return float(drawn) if size is None else drawn

    @override
    def mixture(self) -> NoiseMixture:
        return NoiseMixture(shifts=self._values.copy(), weights=self._probabilities.copy(), gaussian_variance=0.0)

    @override
    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "values": self._values.tolist(), "probabilities": self._probabilities.tolist()}


def noise_sample(m: NoiseModel, rng: np.random.Generator) -> float:
    return m.sample(rng)


def noise_from_record(record: dict[str, Any]) -> NoiseModel:
    match record.get("kind", NoiseKind.NONE):
        case NoiseKind.NONE:
            return NoNoise()
        case NoiseKind.GAUSSIAN:
            if "sigma" not in record:
                raise InvalidNoiseModelError("gaussian noise requires 'sigma'")
            return GaussianNoise(float(record["sigma"]))
        case NoiseKind.DISCRETE:
            if "values" not in record or "probabilities" not in record:
                raise InvalidNoiseModelError("discrete noise requires 'values' and 'probabilities'")
            return DiscreteNoise(record["values"], record["probabilities"])
        case other:
            raise InvalidNoiseModelError(f"unknown noise kind {other!r}")
