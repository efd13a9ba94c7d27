from mgcavity._engine._config import GameConfig as GameConfig, default_warmup as default_warmup
from mgcavity._engine._seeding import StreamPurpose as StreamPurpose, random_stream as random_stream
from mgcavity._engine._strategies import StrategyTable as StrategyTable, draw_strategies as draw_strategies
from mgcavity._engine._state import (
    GameState as GameState,
    StepOutcome as StepOutcome,
    init_scores as init_scores,
    step as step,
)
from mgcavity._engine._series import SignalAccumulators as SignalAccumulators, TimeSeries as TimeSeries
from mgcavity._engine._run import (
    CavityPair as CavityPair,
    StepProbe as StepProbe,
    cavity_experiment as cavity_experiment,
    run as run,
)
