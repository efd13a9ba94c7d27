import logging
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from types import TracebackType
from typing import Any, Self

import numpy as np
from numpy.typing import NDArray
from scipy import stats
from soupape import ServiceCollection

from mgcavity._cavity import (
    CavitySolution,
    CriticalPoint,
    SweepRow,
    find_alpha_c,
    naive_mean_field,
    solve_self_consistent,
    sweep,
)
from mgcavity._dynamics import (
    DecorrelationResult,
    RecordingSchedule,
    TrajectoryRecord,
    cross_agent_decorrelation,
    record_trajectories,
)
from mgcavity._engine import GameConfig, TimeSeries, default_warmup, run
from mgcavity._harness._config import RunConfig
from mgcavity._harness._io import Provenance, artifact_version, dump_json, write_arrays, write_csv, write_json
from mgcavity._measures import ObservableSet, a_histogram, ks_to_prediction, observe
from mgcavity.errors import MinorityGameError

logger = logging.getLogger(__name__)


class OutputWriter:
    """
    Writes result files under the run's output directory. The directory is
    created when the writer is entered and ``manifest.json``, listing every
    file written, is added when it exits.
    """

    def __init__(self, config: RunConfig) -> None:
        self._config = config
        self.directory = config.output.directory
        self.written: list[Path] = []
        self.completed = False

    def __enter__(self) -> Self:
        self.directory.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        manifest = {
            "mode": str(self._config.mode),
            "config": self._config.source,
            "config_hash": self._config.config_hash,
            "version": artifact_version(),
            "completed": self.completed,
            "files": sorted(path.relative_to(self.directory).as_posix() for path in self.written),
        }
        (self.directory / "manifest.json").write_text(dump_json(manifest), encoding="utf-8")
        logger.info("Wrote %d files to %s", len(self.written), self.directory)

    def provenance(self, seeds: Iterable[int] = ()) -> Provenance:
        return Provenance(config_hash=self._config.config_hash, seeds=tuple(seeds), version=artifact_version())

    def _target(self, name: str) -> Path:
        path = self.directory / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(path)
        logger.debug("Writing %s", path)
        return path

    def json(self, name: str, payload: dict[str, Any], seeds: Iterable[int] = ()) -> Path:
        return write_json(self._target(name), payload, self.provenance(seeds))

    def csv(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]], seeds: Iterable[int] = ()) -> Path:
        return write_csv(self._target(name), columns, rows, self.provenance(seeds))

    def arrays(self, name: str, arrays: dict[str, NDArray[Any]], seeds: Iterable[int] = ()) -> Path:
        return write_arrays(self._target(name), arrays, self.provenance(seeds))

    def complete(self) -> None:
        self.completed = True


@dataclass(frozen=True, kw_only=True, eq=False)
class RunSummary:
    seed: int
    observables: ObservableSet
    histogram: tuple[NDArray[np.float64], NDArray[np.float64]]
    ks: float | None = None
    timeseries: TimeSeries | None = None


def simulate_one(
    game: GameConfig,
    *,
    bins: int,
    keep_timeseries: bool = False,
    reference: tuple[float, float] | None = None,
) -> RunSummary:
    """One seeded game reduced to its observables; ``reference`` is a predicted (mean, std) of A + eta."""
    ts = run(game)
    ks = None if reference is None else ks_to_prediction(ts, stats.norm(loc=reference[0], scale=reference[1]))
    return RunSummary(
        seed=game.seed,
        observables=observe(ts, game.b),
        histogram=a_histogram(ts, bins),
        ks=ks,
        timeseries=ts if keep_timeseries else None,
    )


class EnsembleRunner:
    """
    Runs one job per seed over a bounded process pool. Results come back in
    seed order whatever the worker count.
    """

    def __init__(self, config: RunConfig) -> None:
        self._config = config
        self.workers = config.ensemble.workers

    def games(self, game: GameConfig) -> list[GameConfig]:
        return [game.with_seed(seed) for seed in self._config.seeds_for(game)]

    def map[T](self, job: Callable[[GameConfig], T], games: Sequence[GameConfig]) -> list[T]:
        ordered = sorted(games, key=lambda game: game.seed)
        results: list[T] = []
        if self.workers == 1 or len(ordered) == 1:
            for game in ordered:
                try:
                    results.append(job(game))
                except MinorityGameError as err:
                    self._report(game, err)
                    raise
            return results
        with ProcessPoolExecutor(max_workers=min(self.workers, len(ordered))) as pool:
            futures = [(game, pool.submit(job, game)) for game in ordered]
            for game, future in futures:
                try:
                    results.append(future.result())
                except MinorityGameError as err:
                    self._report(game, err)
                    raise
        return results

    @staticmethod
    def _report(game: GameConfig, err: MinorityGameError) -> None:
        logger.error("Run N=%d P=%d seed=%d failed: %s", game.N, game.P, game.seed, err)

    def simulate(self, game: GameConfig, *, reference: tuple[float, float] | None = None) -> list[RunSummary]:
        job = partial(
            simulate_one,
            bins=self._config.output.histogram_bins,
            keep_timeseries=self._config.output.timeseries,
            reference=reference,
        )
        return self.map(job, self.games(game))

    def record(self, game: GameConfig, agents: Sequence[int], schedule: RecordingSchedule) -> list[TrajectoryRecord]:
        return self.map(partial(record_trajectories, ids=agents, schedule=schedule), self.games(game))


class CavitySolver:
    def __init__(self, config: RunConfig) -> None:
        self.model = config.model
        self.settings = config.solver
        self._critical = config.critical

    def solve(self, alpha: float, initial: CavitySolution | None = None) -> CavitySolution:
        return solve_self_consistent(alpha, self.model, settings=self.settings, initial=initial)

    def naive(self, alpha: float) -> CavitySolution:
        return naive_mean_field(alpha, self.model, settings=self.settings)

    def sweep(self, alpha_grid: Sequence[float]) -> list[SweepRow]:
        return sweep(alpha_grid, self.model, settings=self.settings)

    def alpha_c(self) -> CriticalPoint:
        return find_alpha_c(
            self.model,
            low=self._critical.low,
            high=self._critical.high,
            tolerance=self._critical.tolerance,
            settings=self.settings,
        )


class DynamicsLab:
    def __init__(self, config: RunConfig, runner: EnsembleRunner) -> None:
        self._config = config
        self._runner = runner
        self.settings = config.dynamics

    def schedule(self) -> RecordingSchedule:
        return RecordingSchedule(
            dense_until=self.settings.dense_until,
            points_per_decade=self.settings.points_per_decade,
            sign_stride=self.settings.sign_stride,
        )

    def tracked_agents(self, game: GameConfig) -> list[int]:
        return list(range(min(self.settings.agents, game.N)))

    def record(self, game: GameConfig) -> list[TrajectoryRecord]:
        return self._runner.record(game, self.tracked_agents(game), self.schedule())

    def scaled(self, game: GameConfig) -> GameConfig:
        """The same game at ``size_factor`` times N and P, with the same stationary window length."""
        factor = self.settings.size_factor
        P = game.P * factor
        warmup = default_warmup(P)
        return game.replace(N=game.N * factor, P=P, warmup=warmup, T=warmup + game.T - game.warmup)

    def decorrelation(self, game: GameConfig) -> DecorrelationResult:
        return cross_agent_decorrelation(
            game,
            self.scaled(game),
            agents=self.settings.decorrelation_agents,
            pairs=self.settings.decorrelation_pairs,
        )


def define_services(config: RunConfig) -> ServiceCollection:
    services = ServiceCollection()
    services.add_singleton(RunConfig, lambda: config)
    services.add_singleton(OutputWriter)
    services.add_singleton(EnsembleRunner)
    services.add_singleton(CavitySolver)
    services.add_singleton(DynamicsLab)
    return services
