import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from mgcavity._engine._config import GameConfig
from mgcavity._engine._seeding import StreamPurpose, random_stream
from mgcavity._engine._series import SignalAccumulators, TimeSeries
from mgcavity._engine._state import GameState, init_scores, step
from mgcavity._engine._strategies import StrategyTable, draw_strategies

logger = logging.getLogger(__name__)


class StepProbe(Protocol):
    """Observer of a running game. ``start`` and ``observe`` return the next step to be observed, or -1."""

    def start(self, cfg: GameConfig, table: StrategyTable, state: GameState) -> int: ...

    def observe(self, t: int, state: GameState) -> int: ...


@dataclass(frozen=True, kw_only=True, eq=False)
class CavityPair:
    full: TimeSeries
    cavity: TimeSeries
    excluded_agent: int

    @property
    def delta_A(self) -> np.ndarray:
        return self.full.A - self.cavity.A

    @property
    def delta_g(self) -> np.ndarray:
        return self.full.g - self.cavity.g


def run(
    cfg: GameConfig,
    *,
    probe: StepProbe | None = None,
    excluded_agent: int | None = None,
    table: StrategyTable | None = None,
) -> TimeSeries:
    logger.info(
        "Running game N=%d P=%d S=%d T=%d b=%g seed=%d%s",
        cfg.N,
        cfg.P,
        cfg.S,
        cfg.T,
        cfg.b,
        cfg.seed,
        "" if excluded_agent is None else f" without agent {excluded_agent}",
    )
    if table is None:
        table = draw_strategies(cfg, random_stream(cfg.seed, StreamPurpose.STRATEGIES))
    state = init_scores(cfg, random_stream(cfg.seed, StreamPurpose.SCORES))
    signals = random_stream(cfg.seed, StreamPurpose.SIGNALS).integers(0, cfg.P, size=cfg.T, dtype=np.int64)
    etas = np.asarray(cfg.noise.sample(random_stream(cfg.seed, StreamPurpose.NOISE), size=cfg.T), dtype=np.float64)
    choices = None if cfg.learning else random_stream(cfg.seed, StreamPurpose.CHOICES)
    spot_count = min(cfg.spot_checks, cfg.T)
    spot_steps = np.sort(
        random_stream(cfg.seed, StreamPurpose.SPOT_CHECKS).choice(cfg.T, size=spot_count, replace=False)
    ).astype(np.int64)
    spot_actions = np.empty((spot_count, cfg.N), dtype=np.int8)

    A = np.empty(cfg.T, dtype=np.float64)
    g = np.empty(cfg.T, dtype=np.float64)
    two_strategies = cfg.S == 2
    batch_length = 10 * cfg.P
    n_batches = (cfg.T - cfg.warmup) // batch_length
    x_counts = np.zeros(cfg.N, dtype=np.int64) if two_strategies else None
    x_batches = np.zeros((n_batches, cfg.N), dtype=np.int64) if two_strategies else None

    next_probe = probe.start(cfg, table, state) if probe is not None else -1
    next_spot = 0
    for t in range(cfg.T):
        if choices is not None:
            state.best = choices.integers(0, cfg.S, size=cfg.N)
        if two_strategies and t >= cfg.warmup:
            x = 1 - 2 * state.best
            x_counts += x
            batch = (t - cfg.warmup) // batch_length
            if batch < n_batches:
                x_batches[batch] += x
        outcome = step(state, table, cfg, int(signals[t]), float(etas[t]), excluded_agent=excluded_agent)
        A[t] = outcome.A
        g[t] = outcome.g
        if next_spot < spot_count and spot_steps[next_spot] == t:
            spot_actions[next_spot] = outcome.decisions
            next_spot += 1
        if state.t == next_probe:
            next_probe = probe.observe(state.t, state)

    window = slice(cfg.warmup, cfg.T)
    logger.info("Finished game seed=%d after %d steps (%d score ties)", cfg.seed, cfg.T, state.ties)
    return TimeSeries(
        N=cfg.N,
        P=cfg.P,
        S=cfg.S,
        warmup=cfg.warmup,
        A=A,
        g=g,
        mu=signals,
        eta=etas,
        per_mu=SignalAccumulators.collect(signals[window], A[window], g[window], cfg.P),
        x_counts=x_counts,
        x_batches=x_batches,
        spot_steps=spot_steps,
        spot_actions=spot_actions,
        excluded_agent=excluded_agent,
        ties=state.ties,
        seed=cfg.seed,
    )


def cavity_experiment(cfg: GameConfig, excluded_agent: int) -> CavityPair:
    """
    Runs the same disorder and the same signal and noise streams twice, once
    with every agent and once with ``excluded_agent`` kept out of the market.
    """
    if cfg.N < 2:
        raise ValueError("a cavity experiment needs at least two agents")
    if not 0 <= excluded_agent < cfg.N:
        raise IndexError(f"agent {excluded_agent} out of range for N={cfg.N}")
    table = draw_strategies(cfg, random_stream(cfg.seed, StreamPurpose.STRATEGIES))
    return CavityPair(
        full=run(cfg, table=table),
        cavity=run(cfg, table=table, excluded_agent=excluded_agent),
        excluded_agent=excluded_agent,
    )
