from mgcavity._dynamics._record import (
    RecordingSchedule as RecordingSchedule,
    TrajectoryRecord as TrajectoryRecord,
    record_trajectories as record_trajectories,
)
from mgcavity._dynamics._analysis import (
    AgentSelection as AgentSelection,
    BinaryNoiseStats as BinaryNoiseStats,
    DecorrelationResult as DecorrelationResult,
    ExcursionStats as ExcursionStats,
    ScalingFit as ScalingFit,
    binary_noise_test as binary_noise_test,
    cross_agent_decorrelation as cross_agent_decorrelation,
    excursion_test as excursion_test,
    pairwise_covariance as pairwise_covariance,
    random_walk_test as random_walk_test,
    regime_summary as regime_summary,
    sign_autocorrelation as sign_autocorrelation,
)
