import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from mgcavity._engine import TimeSeries
from mgcavity._market import NoiseModel
from mgcavity._measures._stats import (
    Distribution,
    batch_means_error,
    density_histogram,
    excess_kurtosis,
    ks_distance,
    standard_error_of,
)
from mgcavity.errors import EmptyWindowError, InsufficientCoverageError, WrongSError

logger = logging.getLogger(__name__)

EPS_FROZEN = 0.01
MIN_VISITS = 50


@dataclass(frozen=True, kw_only=True, eq=False)
class StrategyPreferences:
    x: NDArray[np.float64]
    q_x: float
    phi: float


@dataclass(frozen=True, kw_only=True, eq=False)
class ConditionalMarket:
    A_mu: NDArray[np.float64]
    g_mu: NDArray[np.float64]
    q_A: float
    q_g: float


@dataclass(frozen=True, kw_only=True)
class VolatilityDecomposition:
    """σ² split into external noise, strategy switching (1 - q_x)/2 and information q_A."""

    sigma_eta2: float
    switching: float
    information: float
    measured: float
    standard_error: float

    @property
    def total(self) -> float:
        return self.sigma_eta2 + self.switching + self.information

    @property
    def residual(self) -> float:
        return self.measured - self.total

    @property
    def parts(self) -> tuple[float, float, float]:
        return (self.sigma_eta2, self.switching, self.information)

    def reconciles(self, n_errors: float = 3.0) -> bool:
        return abs(self.residual) <= n_errors * self.standard_error


@dataclass(frozen=True, kw_only=True, eq=False)
class ObservableSet:
    sigma: float
    sigma2_parts: VolatilityDecomposition | None
    q_x: float
    q_A: float
    q_g: float
    phi: float
    b_used: float
    gbar: float
    gbar_error: float
    kurtosis: float
    x: NDArray[np.float64] | None
    A_mu: NDArray[np.float64]
    g_mu: NDArray[np.float64]
    warmup: int
    window_length: int
    batch_length: int
    eps_frozen: float = EPS_FROZEN

    def to_record(self) -> dict[str, Any]:
        parts = self.sigma2_parts
        return {
            "sigma": self.sigma,
            "sigma2": self.sigma**2,
            "sigma2_noise": parts.sigma_eta2 if parts else None,
            "sigma2_switching": parts.switching if parts else None,
            "sigma2_information": parts.information if parts else None,
            "sigma2_residual": parts.residual if parts else None,
            "sigma2_residual_error": parts.standard_error if parts else None,
            "q_x": self.q_x,
            "q_A": self.q_A,
            "q_g": self.q_g,
            "phi": self.phi,
            "b_used": self.b_used,
            "gbar": self.gbar,
            "gbar_error": self.gbar_error,
            "kurtosis": self.kurtosis,
            "warmup": self.warmup,
            "window_length": self.window_length,
            "batch_length": self.batch_length,
            "eps_frozen": self.eps_frozen,
        }


def _window(ts: TimeSeries) -> slice:
    if ts.window_length <= 0:
        raise EmptyWindowError(ts.T, ts.warmup)
    return ts.window


def volatility(ts: TimeSeries, b: float) -> float:
    window = _window(ts)
    deviation = ts.A[window] + ts.eta[window] - b
    return float(np.sqrt(np.mean(deviation * deviation)))


def _preferences_from_sums(sums: NDArray[np.int64], length: int) -> StrategyPreferences:
    x = sums / length
    return StrategyPreferences(
        x=x,
        q_x=float(np.mean(x * x)),
        phi=float(np.mean(np.abs(x) >= 1.0 - EPS_FROZEN)),
    )


def strategy_preferences(ts: TimeSeries) -> StrategyPreferences:
    if ts.S != 2 or ts.x_counts is None:
        raise WrongSError(ts.S)
    _window(ts)
    return _preferences_from_sums(ts.x_counts, ts.window_length)


def _conditional(
    count: NDArray[np.int64],
    sum_A: NDArray[np.float64],
    sum_A2: NDArray[np.float64],
    sum_g: NDArray[np.float64],
    sum_g2: NDArray[np.float64],
    b: float,
) -> ConditionalMarket:
    A_mu = sum_A / count
    g_mu = sum_g / count
    # unbiased within-signal variances of the sample means
    var_A = np.maximum(sum_A2 - count * A_mu**2, 0.0) / np.maximum(count - 1, 1) / count
    var_g = np.maximum(sum_g2 - count * g_mu**2, 0.0) / np.maximum(count - 1, 1) / count
    return ConditionalMarket(
        A_mu=A_mu,
        g_mu=g_mu,
        q_A=max(float(np.mean((A_mu - b) ** 2 - var_A)), 0.0),
        q_g=max(float(np.mean(g_mu**2 - var_g)), 0.0),
    )


def conditional_market(ts: TimeSeries, b: float) -> ConditionalMarket:
    _window(ts)
    acc = ts.per_mu
    starved = np.flatnonzero(acc.count < MIN_VISITS)
    if starved.size:
        raise InsufficientCoverageError(starved.tolist(), MIN_VISITS)
    return _conditional(acc.count, acc.sum_A, acc.sum_A2, acc.sum_g, acc.sum_g2, b)


def _batch_residuals(ts: TimeSeries, b: float) -> NDArray[np.float64]:
    """Decomposition residual re-estimated on every batch of the window."""
    if ts.n_batches < 2 or ts.x_batches is None:
        return np.empty(0)
    length = ts.batch_length
    window = ts.window
    A, eta, mu = ts.A[window], ts.eta[window], ts.mu[window]
    residuals = []
    for k in range(min(ts.n_batches, ts.x_batches.shape[0])):
        part = slice(k * length, (k + 1) * length)
        a, e, m = A[part], eta[part], mu[part]
        count = np.bincount(m, minlength=ts.P)
        seen = count > 1
        sums = (
            np.bincount(m, weights=a, minlength=ts.P)[seen],
            np.bincount(m, weights=a * a, minlength=ts.P)[seen],
        )
        A_mu = sums[0] / count[seen]
        var_A = np.maximum(sums[1] - count[seen] * A_mu**2, 0.0) / (count[seen] - 1) / count[seen]
        q_A = float(np.mean((A_mu - b) ** 2 - var_A))
        q_x = _preferences_from_sums(ts.x_batches[k], length).q_x
        measured = float(np.mean((a + e - b) ** 2))
        residuals.append(measured - float(np.mean(e * e)) - (1.0 - q_x) / 2.0 - q_A)
    return np.asarray(residuals)


def decompose_volatility(ts: TimeSeries, b: float) -> VolatilityDecomposition:
    window = _window(ts)
    preferences = strategy_preferences(ts)
    market = conditional_market(ts, b)
    eta = ts.eta[window]
    return VolatilityDecomposition(
        sigma_eta2=float(np.mean(eta * eta)),
        switching=(1.0 - preferences.q_x) / 2.0,
        information=market.q_A,
        measured=volatility(ts, b) ** 2,
        standard_error=standard_error_of(_batch_residuals(ts, b)),
    )


def gbar(ts: TimeSeries) -> float:
    window = _window(ts)
    return float(np.mean(ts.g[window]))


def gbar_error(ts: TimeSeries) -> float:
    return batch_means_error(ts.g[_window(ts)], ts.batch_length)


def a_kurtosis(ts: TimeSeries) -> float:
    return excess_kurtosis(ts.A[_window(ts)])


def a_histogram(ts: TimeSeries, bins: int = 101) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return density_histogram(ts.A[_window(ts)], bins)


def ks_to_prediction(ts: TimeSeries, distribution: Distribution) -> float:
    """Kolmogorov-Smirnov distance between the window's A^t + eta^t and a predicted distribution."""
    window = _window(ts)
    return ks_distance(ts.A[window] + ts.eta[window], distribution)


def random_baseline_sigma(N: int, b: float, noise: NoiseModel) -> float:
    """Volatility of N independent agents playing +1 with probability 1/2 + b/(2 sqrt(N)), around b."""
    return float(np.sqrt(1.0 - b * b / N + noise.variance()))


def observe(ts: TimeSeries, b: float) -> ObservableSet:
    window = _window(ts)
    market = conditional_market(ts, b)
    if ts.S == 2 and ts.x_counts is not None:
        preferences = strategy_preferences(ts)
        parts = decompose_volatility(ts, b)
        x, q_x, phi = preferences.x, preferences.q_x, preferences.phi
    else:
        logger.info("Skipping preference observables for S=%d", ts.S)
        parts, x, q_x, phi = None, None, float("nan"), float("nan")
    return ObservableSet(
        sigma=volatility(ts, b),
        sigma2_parts=parts,
        q_x=q_x,
        q_A=market.q_A,
        q_g=market.q_g,
        phi=phi,
        b_used=b,
        gbar=gbar(ts),
        gbar_error=gbar_error(ts),
        kurtosis=excess_kurtosis(ts.A[window]),
        x=x,
        A_mu=market.A_mu,
        g_mu=market.g_mu,
        warmup=ts.warmup,
        window_length=ts.window_length,
        batch_length=ts.batch_length,
    )


