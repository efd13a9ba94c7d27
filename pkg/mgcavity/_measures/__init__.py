from mgcavity._measures._stats import (
    Distribution as Distribution,
    batch_means as batch_means,
    batch_means_error as batch_means_error,
    density_histogram as density_histogram,
    excess_kurtosis as excess_kurtosis,
    ks_distance as ks_distance,
    standard_error_of as standard_error_of,
)
from mgcavity._measures._observables import (
    EPS_FROZEN as EPS_FROZEN,
    MIN_VISITS as MIN_VISITS,
    ConditionalMarket as ConditionalMarket,
    ObservableSet as ObservableSet,
    StrategyPreferences as StrategyPreferences,
    VolatilityDecomposition as VolatilityDecomposition,
    a_histogram as a_histogram,
    a_kurtosis as a_kurtosis,
    conditional_market as conditional_market,
    decompose_volatility as decompose_volatility,
    gbar as gbar,
    gbar_error as gbar_error,
    ks_to_prediction as ks_to_prediction,
    observe as observe,
    random_baseline_sigma as random_baseline_sigma,
    strategy_preferences as strategy_preferences,
    volatility as volatility,
)
