import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum, unique
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from mgcavity._dynamics._record import RecordingSchedule, TrajectoryRecord, record_trajectories
from mgcavity._engine import GameConfig, StreamPurpose, random_stream
from mgcavity._measures import EPS_FROZEN
from mgcavity.errors import InsufficientEnsembleError, WrongSError

logger = logging.getLogger(__name__)

MIN_ENSEMBLE = 100
MIN_FIT_POINTS = 20
DECORRELATION_LEVEL = 0.1
CONVERGENCE_TOLERANCE = 0.05


@unique
class AgentSelection(StrEnum):
    ALL = "all"
    FROZEN = "frozen"
    NON_FROZEN = "non_frozen"


@dataclass(frozen=True, kw_only=True)
class ScalingFit:
    slope: float
    ci_low: float
    ci_high: float
    points: int
    ensemble: int


@dataclass(frozen=True, kw_only=True, eq=False)
class ExcursionStats:
    agent_ids: NDArray[np.int64]
    frozen: NDArray[np.bool_]
    fraction_inside: NDArray[np.float64]
    alternations_per_10P: NDArray[np.float64]
    late_alternations: NDArray[np.int64]

    @property
    def median_fraction_inside(self) -> float:
        return float(np.median(self.fraction_inside[~self.frozen])) if np.any(~self.frozen) else float("nan")

    @property
    def mean_alternations_per_10P(self) -> float:
        return float(np.mean(self.alternations_per_10P[~self.frozen])) if np.any(~self.frozen) else float("nan")

    @property
    def frozen_never_alternate(self) -> bool:
        return bool(np.all(self.late_alternations[self.frozen] == 0))


@dataclass(frozen=True, kw_only=True, eq=False)
class BinaryNoiseStats:
    agent_ids: NDArray[np.int64]
    frozen: NDArray[np.bool_]
    mean: NDArray[np.float64]
    variance: NDArray[np.float64]
    x: NDArray[np.float64]
    decorrelation_lag: NDArray[np.float64]
    drift: NDArray[np.float64]

    @property
    def variance_gap(self) -> NDArray[np.float64]:
        """|empirical variance of sign(U) - (1 - x_i^2)| with x_i the running preference at the end of the run."""
        return np.abs(self.variance - (1.0 - self.x**2))

    @property
    def mixing(self) -> NDArray[np.bool_]:
        return np.isfinite(self.decorrelation_lag)

    @property
    def fraction_converged(self) -> float:
        return float(np.mean(self.drift < CONVERGENCE_TOLERANCE))


@dataclass(frozen=True, kw_only=True)
class DecorrelationResult:
    small: float
    large: float
    pairs: int

    @property
    def ratio(self) -> float:
        return self.small / self.large


def _as_records(rec: TrajectoryRecord | Sequence[TrajectoryRecord]) -> list[TrajectoryRecord]:
    return [rec] if isinstance(rec, TrajectoryRecord) else list(rec)


def _selected(rec: TrajectoryRecord, selection: AgentSelection) -> NDArray[np.bool_]:
    match selection:
        case AgentSelection.ALL:
            return np.ones(rec.agent_ids.size, dtype=bool)
        case AgentSelection.FROZEN:
            return rec.frozen(EPS_FROZEN)
        case AgentSelection.NON_FROZEN:
            return ~rec.frozen(EPS_FROZEN)


def random_walk_test(
    rec: TrajectoryRecord | Sequence[TrajectoryRecord],
    *,
    t_min: int = 1,
    t_max: int | None = None,
    agents: AgentSelection = AgentSelection.ALL,
    min_ensemble: int = MIN_ENSEMBLE,
) -> ScalingFit:
    """
    Growth exponent of the ensemble RMS of U_i^t over ``[t_min, t_max]``
    (default ``t_max``: P/100), fitted by least squares on log-log axes.
    """
    records = _as_records(rec)
    times = records[0].times
    if any(not np.array_equal(r.times, times) for r in records):
        raise ValueError("records must share one recording schedule")
    upper = max(records[0].P // 100, 1) if t_max is None else t_max
    columns = (times >= t_min) & (times <= upper)
    rows = np.concatenate([r.U[_selected(r, agents)][:, columns] for r in records], axis=0)
    if rows.shape[0] < min_ensemble:
        raise InsufficientEnsembleError(rows.shape[0], min_ensemble)
    rms = np.sqrt(np.mean(rows * rows, axis=0))
    usable = rms > 0
    if np.count_nonzero(usable) < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} recorded times in [{t_min}, {upper}]")
    fit = stats.linregress(np.log(times[columns][usable]), np.log(rms[usable]))
    half_width = stats.t.ppf(0.975, np.count_nonzero(usable) - 2) * fit.stderr
    return ScalingFit(
        slope=float(fit.slope),
        ci_low=float(fit.slope - half_width),
        ci_high=float(fit.slope + half_width),
        points=int(np.count_nonzero(usable)),
        ensemble=int(rows.shape[0]),
    )


def _alternations(signs: NDArray[np.int8]) -> NDArray[np.int64]:
    if signs.shape[1] < 2:
        return np.zeros(signs.shape[0], dtype=np.int64)
    return np.count_nonzero(np.diff(signs, axis=1) != 0, axis=1)


def excursion_test(rec: TrajectoryRecord, *, window: tuple[int, int] | None = None) -> ExcursionStats:
    """Boundedness and sign alternation of U_i^t over ``window`` (default [P, 50P])."""
    low, high = window or (rec.P, 50 * rec.P)
    columns = (rec.times >= low) & (rec.times <= high)
    sampled = rec.U[:, columns]
    inside = np.abs(sampled) < np.sqrt(rec.times[columns])
    sign_columns = (rec.sign_times >= low) & (rec.sign_times <= high)
    span = max(int(rec.sign_times[sign_columns][-1] - rec.sign_times[sign_columns][0]), 1) if sign_columns.any() else 1
    late = rec.sign_times > 10 * rec.P
    return ExcursionStats(
        agent_ids=rec.agent_ids,
        frozen=rec.frozen(EPS_FROZEN),
        fraction_inside=inside.mean(axis=1) if sampled.size else np.full(rec.agent_ids.size, np.nan),
        alternations_per_10P=_alternations(rec.signs[:, sign_columns]) * (10 * rec.P / span),
        late_alternations=_alternations(rec.signs[:, late]),
    )


def sign_autocorrelation(signs: NDArray[np.int8], max_lag: int) -> NDArray[np.float64]:
    """Autocorrelation of each row at lags 0..max_lag (in samples); constant rows give NaN beyond lag 0."""
    values = signs.astype(np.float64)
    centred = values - values.mean(axis=1, keepdims=True)
    variance = np.mean(centred * centred, axis=1)
    result = np.full((signs.shape[0], max_lag + 1), np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        result[:, 0] = 1.0
        for lag in range(1, min(max_lag, signs.shape[1] - 1) + 1):
            result[:, lag] = np.mean(centred[:, :-lag] * centred[:, lag:], axis=1) / variance
    return result


def binary_noise_test(rec: TrajectoryRecord, *, window_start: int | None = None) -> BinaryNoiseStats:
    """Long-time statistics of sign(U_i^t) from ``window_start`` (default 10P) to the end of the run."""
    start = 10 * rec.P if window_start is None else window_start
    columns = rec.sign_times >= start
    signs = rec.signs[:, columns]
    if signs.shape[1] < 2:
        raise ValueError(f"fewer than two sign samples after t={start}")
    stride = int(rec.sign_times[1] - rec.sign_times[0]) if rec.sign_times.size > 1 else 1
    max_lag = max(10 * rec.P // stride, 1)
    acf = sign_autocorrelation(signs, max_lag)
    below = acf < DECORRELATION_LEVEL
    first = np.where(below.any(axis=1), below.argmax(axis=1) * stride, np.inf)
    frozen = rec.frozen(EPS_FROZEN)
    drift = np.abs(rec.final_x - rec.x_running_at(rec.window_midpoint))
    return BinaryNoiseStats(
        agent_ids=rec.agent_ids,
        frozen=frozen,
        mean=signs.mean(axis=1),
        variance=signs.astype(np.float64).var(axis=1),
        x=rec.final_x,
        decorrelation_lag=np.where(frozen, np.inf, first),
        drift=np.where(np.isnan(drift), np.inf, drift),
    )


def pairwise_covariance(signs: NDArray[np.integer]) -> NDArray[np.float64]:
    """Stationary covariance matrix of the agents' ±1 series (rows), normalized by the sample count."""
    return np.cov(signs.astype(np.float64), bias=True)


def _mean_abs_covariance(cfg: GameConfig, agents: int, pairs: int, window: int) -> tuple[float, int]:
    sampler = random_stream(cfg.seed, StreamPurpose.SAMPLING)
    tracked = np.sort(sampler.choice(cfg.N, size=min(agents, cfg.N), replace=False))
    start = cfg.T - window + 1
    schedule = RecordingSchedule(dense_until=1, points_per_decade=1, sign_start=start, sign_stride=1)
    rec = record_trajectories(cfg, tracked, schedule)
    covariance = pairwise_covariance(rec.signs)
    upper_i, upper_j = np.triu_indices(tracked.size, k=1)
    chosen = random_stream(cfg.seed, StreamPurpose.SAMPLING, 1).permutation(upper_i.size)[:pairs]
    return float(np.mean(np.abs(covariance[upper_i[chosen], upper_j[chosen]]))), int(chosen.size)


def cross_agent_decorrelation(
    small: GameConfig,
    large: GameConfig,
    *,
    agents: int = 64,
    pairs: int = 1_000,
    window: int | None = None,
) -> DecorrelationResult:
    """
    Mean absolute stationary covariance between preferences of distinct agents
    at two system sizes with the same alpha. ``window`` fixes the number of
    stationary steps used at both sizes (default: the shorter post-warmup span).
    """
    if small.S != 2 or large.S != 2:
        raise WrongSError(small.S if small.S != 2 else large.S)
    if not np.isclose(small.alpha, large.alpha):
        raise ValueError(f"alpha must match, got {small.alpha} and {large.alpha}")
    length = window or min(small.T - small.warmup, large.T - large.warmup)
    small_cov, small_pairs = _mean_abs_covariance(small, agents, pairs, length)
    large_cov, large_pairs = _mean_abs_covariance(large, agents, pairs, length)
    logger.info("Mean |cov| %.3e at P=%d and %.3e at P=%d", small_cov, small.P, large_cov, large.P)
    return DecorrelationResult(small=small_cov, large=large_cov, pairs=min(small_pairs, large_pairs))


def regime_summary(
    rec: TrajectoryRecord | Sequence[TrajectoryRecord], *, min_ensemble: int = MIN_ENSEMBLE
) -> list[dict[str, Any]]:
    """One row per timescale: short-time random walk, bounded excursions around P, binary switching at long times."""
    records = _as_records(rec)
    first = records[0]
    short = random_walk_test(records, min_ensemble=min_ensemble)
    excursions = [excursion_test(r) for r in records]
    inside = np.concatenate([e.fraction_inside[~e.frozen] for e in excursions])
    binary = [binary_noise_test(r) for r in records]
    converged = np.concatenate([b.drift < CONVERGENCE_TOLERANCE for b in binary])
    return [
        {
            "timescale": "t << P",
            "variable": "U_i^t",
            "behaviour": "random walk",
            "statistic": "rms_growth_exponent",
            "value": short.slope,
            "window": [1, max(first.P // 100, 1)],
        },
        {
            "timescale": "t ~ P",
            "variable": "u_i^tau = U_i^t / sqrt(P)",
            "behaviour": "bounded non-Markovian excursions",
            "statistic": "median_fraction_below_sqrt_t",
            "value": float(np.median(inside)) if inside.size else float("nan"),
            "window": [first.P, 50 * first.P],
        },
        {
            "timescale": "t >> P",
            "variable": "sign(U_i^t)",
            "behaviour": "binary noise with mean x_i",
            "statistic": "fraction_preferences_converged",
            "value": float(np.mean(converged)),
            "window": [10 * first.P, first.T],
        },
    ]
