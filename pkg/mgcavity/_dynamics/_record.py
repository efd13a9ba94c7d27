import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from mgcavity._engine import GameConfig, GameState, StrategyTable, run
from mgcavity.errors import WrongSError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True)
class RecordingSchedule:
    """
    Every step up to ``dense_until``, then ``points_per_decade`` log-spaced
    steps. Signs are additionally sampled every ``sign_stride`` steps from
    ``sign_start`` (default: P) onwards.
    """

    dense_until: int = 1_000
    points_per_decade: int = 100
    sign_start: int | None = None
    sign_stride: int | None = None

    def times(self, T: int, *extra: int) -> NDArray[np.int64]:
        dense = np.arange(1, min(self.dense_until, T) + 1, dtype=np.int64)
        if T <= self.dense_until:
            sparse = np.empty(0, dtype=np.int64)
        else:
            decades = np.log10(T) - np.log10(self.dense_until)
            count = max(int(np.ceil(decades * self.points_per_decade)), 1) + 1
            sparse = np.unique(np.round(np.logspace(np.log10(self.dense_until), np.log10(T), count)).astype(np.int64))
        wanted = np.asarray([t for t in extra if 1 <= t <= T], dtype=np.int64)
        return np.unique(np.concatenate([dense, sparse, wanted, [T]]))

    def sign_times(self, P: int, T: int) -> NDArray[np.int64]:
        start = P if self.sign_start is None else self.sign_start
        stride = max(P // 20, 1) if self.sign_stride is None else self.sign_stride
        if start > T:
            return np.empty(0, dtype=np.int64)
        return np.arange(max(start, 1), T + 1, stride, dtype=np.int64)


@dataclass(frozen=True, kw_only=True, eq=False)
class TrajectoryRecord:
    """
    Sampled score gaps U_i^t of tracked agents.

    ``x_running[:, k]`` is the mean preference over post-warmup steps before
    ``times[k]`` (NaN while still in warmup). ``signs`` are sign(U_i^t) at
    ``sign_times``.
    """

    agent_ids: NDArray[np.int64]
    times: NDArray[np.int64]
    U: NDArray[np.float64]
    x_running: NDArray[np.float64]
    sign_times: NDArray[np.int64]
    signs: NDArray[np.int8]
    P: int
    T: int
    warmup: int
    seed: int = 0

    @property
    def tau(self) -> NDArray[np.float64]:
        return self.times / self.P

    @property
    def u_tau(self) -> NDArray[np.float64]:
        return self.U / np.sqrt(self.P)

    @property
    def final_x(self) -> NDArray[np.float64]:
        return self.x_running[:, -1]

    @property
    def window_midpoint(self) -> int:
        """Middle of the measurement window, where preference drift is compared against the end of the run."""
        return self.warmup + (self.T - self.warmup) // 2

    def x_running_at(self, t: int) -> NDArray[np.float64]:
        """Running preference at the recorded time closest to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return self.x_running[:, k]

    def frozen(self, eps: float) -> NDArray[np.bool_]:
        return np.abs(self.final_x) >= 1.0 - eps


class _TrajectoryProbe:
    def __init__(self, ids: NDArray[np.int64], times: NDArray[np.int64], sign_times: NDArray[np.int64]) -> None:
        self.ids = ids
        self.times = times
        self.sign_times = sign_times
        self.U = np.empty((ids.size, times.size), dtype=np.float64)
        self.x_running = np.full((ids.size, times.size), np.nan, dtype=np.float64)
        self.signs = np.empty((ids.size, sign_times.size), dtype=np.int8)
        self._counts = np.zeros(ids.size, dtype=np.int64)
        self._k = 0
        self._s = 0
        self._warmup = 0
        self._T = 0

    def _next(self, t: int) -> int:
        pending: list[int] = []
        if self._warmup <= t + 1 < self._T:
            pending.append(t + 1)
        elif t < self._warmup < self._T:
            pending.append(self._warmup)
        if self._k < self.times.size:
            pending.append(int(self.times[self._k]))
        if self._s < self.sign_times.size:
            pending.append(int(self.sign_times[self._s]))
        return min(pending) if pending else -1

    def _count(self, t: int, state: GameState) -> None:
        if self._warmup <= t < self._T:
            self._counts += 1 - 2 * state.best[self.ids]

    def start(self, cfg: GameConfig, table: StrategyTable, state: GameState) -> int:
        self._warmup = cfg.warmup
        self._T = cfg.T
        self._count(0, state)
        return self._next(0)

    def observe(self, t: int, state: GameState) -> int:
        if self._k < self.times.size and self.times[self._k] == t:
            self.U[:, self._k] = state.score_gap[self.ids]
            if t > self._warmup:
                self.x_running[:, self._k] = self._counts / (t - self._warmup)
            self._k += 1
        if self._s < self.sign_times.size and self.sign_times[self._s] == t:
            self.signs[:, self._s] = state.preferences[self.ids]
            self._s += 1
        self._count(t, state)
        return self._next(t)


def record_trajectories(
    cfg: GameConfig,
    ids: Sequence[int] | NDArray[np.integer],
    schedule: RecordingSchedule | None = None,
) -> TrajectoryRecord:
    if cfg.S != 2:
        raise WrongSError(cfg.S)
    agent_ids = np.asarray(ids, dtype=np.int64)
    if agent_ids.size == 0 or agent_ids.min() < 0 or agent_ids.max() >= cfg.N:
        raise IndexError(f"tracked agents must be a non-empty subset of [0, {cfg.N})")
    schedule = schedule or RecordingSchedule()
    probe = _TrajectoryProbe(
        agent_ids,
        schedule.times(cfg.T, cfg.warmup + (cfg.T - cfg.warmup) // 2),
        schedule.sign_times(cfg.P, cfg.T),
    )
    run(cfg, probe=probe)
    logger.info("Recorded %d agents at %d times (seed=%d)", agent_ids.size, probe.times.size, cfg.seed)
    return TrajectoryRecord(
        agent_ids=agent_ids,
        times=probe.times,
        U=probe.U,
        x_running=probe.x_running,
        sign_times=probe.sign_times,
        signs=probe.signs,
        P=cfg.P,
        T=cfg.T,
        warmup=cfg.warmup,
        seed=cfg.seed,
    )
