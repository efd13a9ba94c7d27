import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.special import erf, erfc

from mgcavity._cavity._fields import EffectiveNoise, ghat, ghat_prime
from mgcavity._cavity._quadrature import QuadratureGrid
from mgcavity._market import LinearPrice, MarketModel
from mgcavity.errors import DegenerateFieldError, DegenerateReactionError, NoBracketError, RangeExhaustedError

logger = logging.getLogger(__name__)

DEFAULT_GRID = QuadratureGrid()
BIAS_TOLERANCE = 1e-10
ESCAPE_TOLERANCE = 1e-4


@dataclass(frozen=True, kw_only=True)
class OrderParameters:
    q_x: float
    q_g: float
    q_A: float


def signal_field_variance(q_x: float) -> float:
    """Variance of the signal cavity field z_g, centred on the bias b."""
    return 0.5 + 0.5 * q_x


def agent_field_variance(q_g: float, alpha: float) -> float:
    """Variance of the agent cavity field z_x, centred on zero."""
    return 0.5 * alpha * q_g


def reaction_Rx(
    alpha: float,
    R_g: float,
    q_x: float,
    b: float,
    model: MarketModel,
    grid: QuadratureGrid = DEFAULT_GRID,
) -> float:
    """R_x = -(alpha/2) E[ĝ'(z_g)] with z_g ~ N(b, 1/2 + q_x/2)."""
    noise = EffectiveNoise.combine(model.noise, q_x, grid)
    slopes = ghat_prime(grid.points(b, signal_field_variance(q_x)), R_g, model.price, noise)
    return -0.5 * alpha * float(grid.weights @ slopes)


def unfrozen_fraction(R_x: float, q_g: float, alpha: float) -> float:
    """1 - phi: probability that the agent field stays inside (-|R_x|, |R_x|)."""
    if not R_x < 0:
        raise DegenerateReactionError(R_x)
    if not q_g > 0:
        raise DegenerateFieldError(q_g)
    return float(erf(-R_x / np.sqrt(2.0 * agent_field_variance(q_g, alpha))))


def reaction_Rg(R_x: float, q_g: float, alpha: float) -> tuple[float, float]:
    """R_g = (1 - phi) / (2 R_x), with the frozen fraction phi from the error function."""
    one_minus_phi = unfrozen_fraction(R_x, q_g, alpha)
    return one_minus_phi / (2.0 * R_x), 1.0 - one_minus_phi


def clipped_second_moment(u: float) -> float:
    """E[clip(z/u, -1, 1)^2] for a standard Gaussian z."""
    if u == np.inf:
        return 0.0
    inside = erf(u / np.sqrt(2.0)) - u * np.sqrt(2.0 / np.pi) * np.exp(-0.5 * u * u)
    return float(erfc(u / np.sqrt(2.0)) + inside / (u * u))


def preference_moment(R_x: float, q_g: float, alpha: float) -> float:
    """q_x = E[x̂(z_x)^2] from the Gaussian partial moments of the clipped linear response."""
    if not R_x < 0:
        raise DegenerateReactionError(R_x)
    if not q_g > 0:
        raise DegenerateFieldError(q_g)
    return clipped_second_moment(-R_x / np.sqrt(agent_field_variance(q_g, alpha)))


def check_operating_range(
    b: float,
    R_g: float,
    prices: NDArray[np.float64],
    z: NDArray[np.float64],
    model: MarketModel,
    noise: EffectiveNoise,
    grid: QuadratureGrid = DEFAULT_GRID,
) -> float:
    """
    Probability, over signals and noise, that the price argument
    z_g + R_g ĝ + δ + η leaves the operating range. Fails with
    :py:class:`RangeExhaustedError` above :py:data:`ESCAPE_TOLERANCE`.
    """
    escaped = float(grid.weights @ noise.escaped_mass(model.price.operating_range, z + R_g * prices))
    if escaped > ESCAPE_TOLERANCE:
        raise RangeExhaustedError(b, R_g, escaped=escaped)
    if escaped > 0.0:
        logger.debug("Price arguments leave the operating range with probability %.2e at b=%.8g", escaped, b)
    return escaped


def update_order_params(
    R_x: float,
    R_g: float,
    b: float,
    q_x: float,
    q_g: float,
    alpha: float,
    model: MarketModel,
    grid: QuadratureGrid = DEFAULT_GRID,
) -> OrderParameters:
    """
    New (q_x, q_g, q_A) from the reaction terms and the current field
    distributions: q_x from z_x ~ N(0, alpha q_g / 2), q_g and q_A from
    z_g ~ N(b, 1/2 + q_x/2).
    """
    noise = EffectiveNoise.combine(model.noise, q_x, grid)
    z = grid.points(b, signal_field_variance(q_x))
    prices = np.asarray(ghat(z, R_g, model.price, noise))
    check_operating_range(b, R_g, prices, z, model, noise, grid)
    arbitrage = z + R_g * prices
    return OrderParameters(
        q_x=preference_moment(R_x, q_g, alpha),
        q_g=float(grid.weights @ prices**2),
        q_A=float(grid.weights @ (arbitrage - b) ** 2),
    )


def mean_price(b: float, R_g: float, q_x: float, model: MarketModel, grid: QuadratureGrid = DEFAULT_GRID) -> float:
    noise = EffectiveNoise.combine(model.noise, q_x, grid)
    return float(grid.weights @ np.asarray(ghat(grid.points(b, signal_field_variance(q_x)), R_g, model.price, noise)))


def solve_bias(
    R_g: float,
    q_x: float,
    model: MarketModel,
    grid: QuadratureGrid = DEFAULT_GRID,
    *,
    start: float | None = None,
) -> float:
    """The bias b for which the mean price over signals vanishes."""
    if isinstance(model.price, LinearPrice):
        return 0.0
    noise = EffectiveNoise.combine(model.noise, q_x, grid)
    variance = signal_field_variance(q_x)

    def mean(b: float) -> float:
        return float(grid.weights @ np.asarray(ghat(grid.points(b, variance), R_g, model.price, noise)))

    low_limit, high_limit = model.price.operating_range
    center = model.price.root() if start is None else start
    width = np.sqrt(variance)
    low, high = center - width, center + width
    f_low, f_high = mean(low), mean(high)
    # the mean price increases with b
    while f_low > 0:
        if low <= low_limit:
            raise NoBracketError("the bias", low, high)
        low = max(low - 2.0 * width, low_limit)
        f_low = mean(low)
        width *= 2.0
    while f_high < 0:
        if high >= high_limit:
            raise NoBracketError("the bias", low, high)
        high = min(high + 2.0 * width, high_limit)
        f_high = mean(high)
        width *= 2.0
    b, info = brentq(mean, low, high, xtol=1e-15, rtol=4 * np.finfo(float).eps, full_output=True)
    residual = mean(b)
    if abs(residual) > BIAS_TOLERANCE:
        raise NoBracketError("the bias", low, high)
    z = grid.points(b, variance)
    check_operating_range(b, R_g, np.asarray(ghat(z, R_g, model.price, noise)), z, model, noise, grid)
    logger.debug("Solved bias b=%.12g in %d evaluations (residual %.2e)", b, info.function_calls, residual)
    return float(b)
