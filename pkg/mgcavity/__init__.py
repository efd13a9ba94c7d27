from mgcavity._market import (
    DiscreteNoise as DiscreteNoise,
    GaussianNoise as GaussianNoise,
    LinearPrice as LinearPrice,
    MarketModel as MarketModel,
    NoiseModel as NoiseModel,
    NoNoise as NoNoise,
    PolynomialPrice as PolynomialPrice,
    PriceFunction as PriceFunction,
    TabulatedPrice as TabulatedPrice,
    eval_price as eval_price,
    eval_price_derivative as eval_price_derivative,
    eval_price_second_derivative as eval_price_second_derivative,
    noise_sample as noise_sample,
)
from mgcavity._engine import (
    GameConfig as GameConfig,
    GameState as GameState,
    StrategyTable as StrategyTable,
    TimeSeries as TimeSeries,
    cavity_experiment as cavity_experiment,
    draw_strategies as draw_strategies,
    init_scores as init_scores,
    run as run,
    step as step,
)
from mgcavity._measures import (
    ObservableSet as ObservableSet,
    decompose_volatility as decompose_volatility,
    observe as observe,
    strategy_preferences as strategy_preferences,
    volatility as volatility,
)
from mgcavity._cavity import (
    CavitySolution as CavitySolution,
    SolverSettings as SolverSettings,
    find_alpha_c as find_alpha_c,
    predict_A_distribution as predict_A_distribution,
    solve_self_consistent as solve_self_consistent,
    sweep as sweep,
)
from mgcavity._dynamics import (
    TrajectoryRecord as TrajectoryRecord,
    binary_noise_test as binary_noise_test,
    cross_agent_decorrelation as cross_agent_decorrelation,
    excursion_test as excursion_test,
    random_walk_test as random_walk_test,
    record_trajectories as record_trajectories,
    regime_summary as regime_summary,
)
from mgcavity._harness import RunConfig as RunConfig, load_config as load_config, main as main


__all__ = [
    "CavitySolution",
    "DiscreteNoise",
    "GameConfig",
    "GameState",
    "GaussianNoise",
    "LinearPrice",
    "MarketModel",
    "NoNoise",
    "NoiseModel",
    "ObservableSet",
    "PolynomialPrice",
    "PriceFunction",
    "RunConfig",
    "SolverSettings",
    "StrategyTable",
    "TabulatedPrice",
    "TimeSeries",
    "TrajectoryRecord",
    "binary_noise_test",
    "cavity_experiment",
    "cross_agent_decorrelation",
    "decompose_volatility",
    "draw_strategies",
    "eval_price",
    "eval_price_derivative",
    "eval_price_second_derivative",
    "excursion_test",
    "find_alpha_c",
    "init_scores",
    "load_config",
    "main",
    "noise_sample",
    "observe",
    "predict_A_distribution",
    "random_walk_test",
    "record_trajectories",
    "regime_summary",
    "run",
    "solve_self_consistent",
    "step",
    "strategy_preferences",
    "sweep",
    "volatility",
]
