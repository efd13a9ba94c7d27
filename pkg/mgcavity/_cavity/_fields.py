import logging
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq, newton

from mgcavity._cavity._quadrature import QuadratureGrid
from mgcavity._market import LinearPrice, NoiseModel, PriceFunction
from mgcavity.errors import DegenerateReactionError, RangeExhaustedError

logger = logging.getLogger(__name__)

type ScalarField = Callable[[NDArray[np.float64]], NDArray[np.float64]]

NEWTON_TOLERANCE = 1e-13
ROOT_TOLERANCE = 1e-12


@dataclass(frozen=True, kw_only=True, eq=False)
class EffectiveNoise:
    """
    Combined switching noise δ ~ N(0, (1 - q_x)/2) and external noise η, as a
    weighted set of offsets. Gaussian η is merged into δ's variance; a discrete
    η contributes one shifted copy of the Gaussian rule per support point.
    """

    variance: float
    offsets: NDArray[np.float64]
    weights: NDArray[np.float64]

    @classmethod
    def combine(cls, noise: NoiseModel, q_x: float, grid: QuadratureGrid) -> "EffectiveNoise":
        mixture = noise.mixture()
        if q_x > 1.0:
            logger.debug("Preference moment q_x=%.15g exceeds 1; switching noise variance set to 0", q_x)
        variance = max((1.0 - q_x) / 2.0, 0.0) + mixture.gaussian_variance
        if variance == 0.0:
            return cls(variance=0.0, offsets=mixture.shifts.copy(), weights=mixture.weights.copy())
        offsets = mixture.shifts[:, None] + np.sqrt(variance) * grid.nodes[None, :]
        weights = mixture.weights[:, None] * grid.weights[None, :]
        return cls(variance=variance, offsets=offsets.ravel(), weights=weights.ravel())

    def mean_of(
        self,
        f: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        centers: NDArray[np.float64],
    ) -> NDArray[np.float64]:
        return f(centers[..., None] + self.offsets) @ self.weights

    def escaped_mass(self, operating_range: tuple[float, float], centers: NDArray[np.float64]) -> NDArray[np.float64]:
        """Probability that center + δ + η falls outside the operating range, per center."""
        low, high = operating_range
        return self.mean_of(lambda x: ((x < low) | (x > high)).astype(np.float64), centers)


def _held(g: PriceFunction) -> tuple[ScalarField, ScalarField]:
    """g and g' with g held flat beyond the operating range."""
    low, high = g.operating_range

    def value(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return g.evaluate(np.clip(x, low, high))

    def slope(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.where((x >= low) & (x <= high), g.derivative(np.clip(x, low, high)), 0.0)

    return value, slope


def xhat(z_x: ArrayLike, R_x: float) -> NDArray[np.float64] | float:
    """Stationary preference of an agent in cavity field z_x: z_x / R_x clipped to [-1, 1]."""
    if not R_x < 0:
        raise DegenerateReactionError(R_x)
    result = np.clip(np.asarray(z_x, dtype=np.float64) / R_x, -1.0, 1.0)
    return float(result) if result.ndim == 0 else result


def _solve_ghat(
    z: NDArray[np.float64],
    R_g: float,
    g: PriceFunction,
    noise: EffectiveNoise,
) -> NDArray[np.float64]:
    value, derivative = _held(g)

    def residual(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return y - noise.mean_of(value, z + R_g * y)

    def slope(y: NDArray[np.float64]) -> NDArray[np.float64]:
        return 1.0 - R_g * noise.mean_of(derivative, z + R_g * y)

    # linearized about R_g = 0
    start = noise.mean_of(value, z) / (1.0 - R_g * noise.mean_of(derivative, z))
    roots, converged = start.copy(), np.zeros_like(start, dtype=bool)
    if start.size > 1:
        roots, converged = _newton(residual, slope, start)
    converged &= np.isfinite(roots)
    candidate = np.where(converged, roots, start)
    converged &= np.abs(residual(candidate)) < ROOT_TOLERANCE * (1.0 + np.abs(candidate))

    # F' >= 1, so the root lies within |F(start)| of start
    for k in np.flatnonzero(~converged):

        def scalar(y: float, k: int = k) -> float:
            return float(y - noise.mean_of(value, np.array(z[k] + R_g * y)))

        shift = scalar(float(start[k]))
        low, high = float(start[k]) - max(shift, 0.0), float(start[k]) - min(shift, 0.0)
        if not (np.isfinite(low) and np.isfinite(high)):
            raise RangeExhaustedError(float(z[k]), R_g)
        if low == high:
            roots[k] = low
            continue
        try:
            roots[k] = brentq(scalar, low, high, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        except ValueError as err:
            raise RangeExhaustedError(float(z[k]), R_g) from err
    return roots


def _newton(
    residual: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    slope: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    start: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            found = newton(residual, start, fprime=slope, tol=NEWTON_TOLERANCE, maxiter=100, full_output=True)
    except RuntimeError:
        return start.copy(), np.zeros_like(start, dtype=bool)
    return np.asarray(found.root, dtype=np.float64), np.asarray(found.converged, dtype=bool)


def _as_result(values: NDArray[np.float64], like: ArrayLike) -> NDArray[np.float64] | float:
    return float(values.reshape(())) if np.ndim(like) == 0 else values.reshape(np.shape(like))


def ghat(z_g: ArrayLike, R_g: float, g: PriceFunction, effective_noise: EffectiveNoise) -> NDArray[np.float64] | float:
    """Mean price at a signal with cavity field z_g: the root y of y = <g(z_g + R_g y + δ + η)>."""
    if R_g > 0:
        raise ValueError(f"price reaction must be non-positive, got R_g={R_g!r}")
    z = np.atleast_1d(np.asarray(z_g, dtype=np.float64)).ravel()
    if isinstance(g, LinearPrice):
        return _as_result(z / (1.0 - R_g), z_g)
    return _as_result(_solve_ghat(z, R_g, g, effective_noise), z_g)


def ghat_prime(
    z_g: ArrayLike, R_g: float, g: PriceFunction, effective_noise: EffectiveNoise
) -> NDArray[np.float64] | float:
    """dĝ/dz_g = 1 / (1/<g'(z_g + R_g ĝ + δ + η)> - R_g)."""
    if R_g > 0:
        raise ValueError(f"price reaction must be non-positive, got R_g={R_g!r}")
    z = np.atleast_1d(np.asarray(z_g, dtype=np.float64)).ravel()
    if isinstance(g, LinearPrice):
        return _as_result(np.full_like(z, 1.0 / (1.0 - R_g)), z_g)
    y = _solve_ghat(z, R_g, g, effective_noise)
    mean_slope = effective_noise.mean_of(_held(g)[1], z + R_g * y)
    return _as_result(mean_slope / (1.0 - R_g * mean_slope), z_g)


def Ahat(
    z_g: ArrayLike, R_g: float, g: PriceFunction, effective_noise: EffectiveNoise
) -> NDArray[np.float64] | float:
    """Expected arbitrage at a signal with cavity field z_g: z_g + R_g ĝ(z_g)."""
    z = np.asarray(z_g, dtype=np.float64)
    return _as_result(np.atleast_1d(z + R_g * np.asarray(ghat(z_g, R_g, g, effective_noise))).ravel(), z_g)
