from abc import ABC, abstractmethod
from collections.abc import Sequence
from enum import StrEnum, unique
from typing import Any, override

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from mgcavity.errors import InvalidPriceFunctionError, NoBracketError, OutOfRangeError

type FloatArray = NDArray[np.float64]

VALIDATION_GRID_SIZE = 10_000


def default_operating_range(sigma_expected: float) -> tuple[float, float]:
    """Range of excess demand over which a price function is asserted valid: eight expected deviations."""
    if not sigma_expected > 0:
        raise InvalidPriceFunctionError(f"expected volatility must be positive, got {sigma_expected!r}")
    return (-8.0 * sigma_expected, 8.0 * sigma_expected)


@unique
class PriceKind(StrEnum):
    LINEAR = "linear"
    POLYNOMIAL = "polynomial"
    TABULATED = "tabulated"


class PriceFunction(ABC):
    """
    Monotone map g from excess demand to log-return.

    Subclasses provide unchecked vectorized evaluation; the public
    :py:meth:`__call__` and :py:meth:`slope` refuse arguments outside of
    :py:attr:`operating_range`. Construction fails unless g' > 0 on a dense
    grid of that range.
    """

    kind: PriceKind

    def __init__(self, operating_range: tuple[float, float]) -> None:
        low, high = float(operating_range[0]), float(operating_range[1])
        if not (np.isfinite(low) and np.isfinite(high) and low < high):
            raise InvalidPriceFunctionError(f"operating range must be a finite interval, got {operating_range!r}")
        self._range = (low, high)

    def _validate(self) -> None:
        grid = np.linspace(*self._range, VALIDATION_GRID_SIZE)
        slopes = self.derivative(grid)
        if not np.all(slopes > 0):
            where = float(grid[np.argmin(slopes)])
            raise InvalidPriceFunctionError(f"g' is not positive on the operating range (g'({where:.4g}) <= 0)")

    @property
    def operating_range(self) -> tuple[float, float]:
        return self._range

    def contains(self, x: ArrayLike) -> bool:
        values = np.asarray(x, dtype=np.float64)
        return bool(np.all((values >= self._range[0]) & (values <= self._range[1])))

    def _check(self, x: ArrayLike) -> None:
        if not self.contains(x):
            values = np.atleast_1d(np.asarray(x, dtype=np.float64))
            outside = values[(values < self._range[0]) | (values > self._range[1]) | np.isnan(values)]
            raise OutOfRangeError(float(outside[0]), self._range)

    def __call__(self, x: float) -> float:
        self._check(x)
        return float(self.evaluate(np.float64(x)))

    def slope(self, x: float) -> float:
        self._check(x)
        return float(self.derivative(np.float64(x)))

    def curvature_at(self, x: float) -> float:
        self._check(x)
        return float(self.second_derivative(np.float64(x)))

    @abstractmethod
    def evaluate(self, x: ArrayLike) -> FloatArray: ...

    @abstractmethod
    def derivative(self, x: ArrayLike) -> FloatArray: ...

    @abstractmethod
    def second_derivative(self, x: ArrayLike) -> FloatArray: ...

    @abstractmethod
    def to_record(self) -> dict[str, Any]: ...

    def curvature(self) -> int:
        """+1 if g is convex on the operating range, -1 if concave, 0 otherwise."""
        second = self.second_derivative(np.linspace(*self._range, VALIDATION_GRID_SIZE))
        scale = 1e-12 * max(1.0, float(np.max(np.abs(second))))
        if np.all(second >= -scale):
            return 0 if np.all(np.abs(second) <= scale) else 1
        if np.all(second <= scale):
            return -1
        return 0

    def root(self) -> float:
        """The excess demand b0 with g(b0) = 0."""
        low, high = self._range
        g_low, g_high = float(self.evaluate(low)), float(self.evaluate(high))
        if g_low == 0.0:
            return low
        if g_high == 0.0:
            return high
        if g_low > 0 or g_high < 0:
            raise NoBracketError("the price root", low, high)
        return float(brentq(lambda x: float(self.evaluate(x)), low, high, xtol=1e-14, rtol=1e-14))

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.to_record()}>"


class LinearPrice(PriceFunction):
    kind = PriceKind.LINEAR

    def __init__(self, operating_range: tuple[float, float] = (-8.0, 8.0)) -> None:
        super().__init__(operating_range)

    @override
    def evaluate(self, x: ArrayLike) -> FloatArray:
        return np.asarray(x, dtype=np.float64).copy()

    @override
    def derivative(self, x: ArrayLike) -> FloatArray:
        return np.ones_like(np.asarray(x, dtype=np.float64))

    @override
    def second_derivative(self, x: ArrayLike) -> FloatArray:
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    @override
    def root(self) -> float:
        return 0.0

    @override
    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "operating_range": list(self._range)}


class PolynomialPrice(PriceFunction):
    """g(x) = c_1 x + c_2 x^2 + ... + c_K x^K, evaluated by Horner's scheme."""

    kind = PriceKind.POLYNOMIAL

    def __init__(self, coefficients: Sequence[float], operating_range: tuple[float, float] = (-8.0, 8.0)) -> None:
        super().__init__(operating_range)
        if len(coefficients) == 0:
            raise InvalidPriceFunctionError("a polynomial price needs at least one coefficient")
        self._coefficients = tuple(float(c) for c in coefficients)
        self._poly = Polynomial([0.0, *self._coefficients])
        self._first = self._poly.deriv(1)
        self._second = self._poly.deriv(2)
        self._validate()

    @property
    def coefficients(self) -> tuple[float, ...]:
        return self._coefficients

    @override
    def evaluate(self, x: ArrayLike) -> FloatArray:
        return self._poly(np.asarray(x, dtype=np.float64))

    @override
    def derivative(self, x: ArrayLike) -> FloatArray:
        return self._first(np.asarray(x, dtype=np.float64))

    @override
    def second_derivative(self, x: ArrayLike) -> FloatArray:
        return self._second(np.asarray(x, dtype=np.float64))

    @override
    def to_record(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "coeffs": list(self._coefficients), "operating_range": list(self._range)}


class TabulatedPrice(PriceFunction):
    """Monotone piecewise-cubic (PCHIP) interpolation of sorted breakpoints."""

    kind = PriceKind.TABULATED

    def __init__(
        self,
        breakpoints: Sequence[float],
        values: Sequence[float],
        operating_range: tuple[float, float] | None = None,
    ) -> None:
        xs = np.asarray(breakpoints, dtype=np.float64)
        ys = np.asarray(values, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise InvalidPriceFunctionError("breakpoints and values must be two sequences of equal length >= 2")
        if not np.all(np.diff(xs) > 0):
            raise InvalidPriceFunctionError("breakpoints must be strictly increasing")
        if not np.all(np.diff(ys) > 0):
            raise InvalidPriceFunctionError("tabulated values must be strictly increasing")
        super().__init__(operating_range if operating_range is not None else (float(xs[0]), float(xs[-1])))
        self._xs = xs
        self._ys = ys
        self._interp = PchipInterpolator(xs, ys, extrapolate=True)
        self._first = self._interp.derivative(1)
        self._second = self._interp.derivative(2)
        self._validate()

    @override
    def evaluate(self, x: ArrayLike) -> FloatArray:
        return np.asarray(self._interp(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    @override
    def derivative(self, x: ArrayLike) -> FloatArray:
        return np.asarray(self._first(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    @override
    def second_derivative(self, x: ArrayLike) -> FloatArray:
        return np.asarray(self._second(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    @override
    def to_record(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "breakpoints": self._xs.tolist(),
            "values": self._ys.tolist(),
            "operating_range": list(self._range),
        }


def eval_price(g: PriceFunction, x: float) -> float:
    return g(x)


def eval_price_derivative(g: PriceFunction, x: float) -> float:
    return g.slope(x)


def eval_price_second_derivative(g: PriceFunction, x: float) -> float:
    return g.curvature_at(x)


def price_from_record(record: dict[str, Any], *, sigma_expected: float = 1.0) -> PriceFunction:
    """Builds a price function from a tagged configuration record such as ``{kind="polynomial", coeffs=[...]}``."""
    operating_range = record.get("operating_range")
    if operating_range is not None:
        if len(operating_range) != 2:
            raise InvalidPriceFunctionError(f"operating_range must have two bounds, got {operating_range!r}")
        bounds = (float(operating_range[0]), float(operating_range[1]))
    else:
        bounds = default_operating_range(float(record.get("sigma_expected", sigma_expected)))
    match record.get("kind"):
        case PriceKind.LINEAR:
            return LinearPrice(bounds)
        case PriceKind.POLYNOMIAL:
            if "coeffs" not in record:
                raise InvalidPriceFunctionError("polynomial price requires 'coeffs'")
            return PolynomialPrice(record["coeffs"], bounds)
        case PriceKind.TABULATED:
            if "breakpoints" not in record or "values" not in record:
                raise InvalidPriceFunctionError("tabulated price requires 'breakpoints' and 'values'")
            return TabulatedPrice(record["breakpoints"], record["values"], bounds if operating_range else None)
        case other:
            raise InvalidPriceFunctionError(f"unknown price kind {other!r}")
