from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.typing import NDArray

DEFAULT_ORDER = 64


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Probabilists' Gauss-Hermite rule, normalized so that it integrates against a unit Gaussian."""

    order: int = DEFAULT_ORDER
    nodes: NDArray[np.float64] = field(init=False, repr=False)
    weights: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError(f"quadrature order must be positive, got {self.order}")
        nodes, weights = hermegauss(self.order)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights / weights.sum())

    def points(self, mean: float, variance: float) -> NDArray[np.float64]:
        return mean + np.sqrt(variance) * self.nodes

    def expect(self, f: Callable[[NDArray[np.float64]], NDArray[np.float64]], mean: float, variance: float) -> float:
        return float(self.weights @ f(self.points(mean, variance)))

    def refined(self) -> "QuadratureGrid":
        return QuadratureGrid(2 * self.order)
