import numpy as np
import pytest

from mgcavity import (
    GameConfig,
    TrajectoryRecord,
    binary_noise_test,
    cross_agent_decorrelation,
    excursion_test,
    random_walk_test,
    record_trajectories,
    regime_summary,
    run,
    strategy_preferences,
)
from mgcavity._dynamics import AgentSelection, RecordingSchedule, pairwise_covariance, sign_autocorrelation
from mgcavity._measures import EPS_FROZEN
from mgcavity.errors import InsufficientEnsembleError, WrongSError


def _synthetic_record(
    *, agents: int = 200, frozen: int = 20, P: int = 2_000, T: int = 200_000, warmup: int = 0
) -> TrajectoryRecord:
    """Random walk up to t=100, bounded excursions afterwards, binary signs with a fixed mean at long times."""
    rng = np.random.default_rng(23)
    times = np.unique(np.concatenate([np.arange(1, 1_001), np.round(np.logspace(3, np.log10(T), 200))])).astype(
        np.int64
    )
    walk = np.cumsum(rng.choice([-1.0, 1.0], size=(agents, 100)), axis=1)
    bounded = 10.0 * np.sin(times[None, :] / P + np.arange(agents)[:, None])
    U = np.where(times[None, :] <= 100, walk[:, np.minimum(times, 100) - 1], bounded)
    x = np.concatenate([np.ones(frozen), rng.uniform(-0.5, 0.5, agents - frozen)])
    sign_times = np.arange(P, T + 1, P // 20, dtype=np.int64)
    draws = rng.random((agents, sign_times.size)) < (1.0 + x[:, None]) / 2.0
    signs = np.where(draws, 1, -1).astype(np.int8)
    return TrajectoryRecord(
        agent_ids=np.arange(agents, dtype=np.int64),
        times=times,
        U=U,
        x_running=np.where(times[None, :] > warmup, x[:, None], np.nan),
        sign_times=sign_times,
        signs=signs,
        P=P,
        T=T,
        warmup=warmup,
    )


def test_recording_schedule_times() -> None:
    schedule = RecordingSchedule(dense_until=100, points_per_decade=10)

    times = schedule.times(10_000, 5_555)

    assert times[:100].tolist() == list(range(1, 101))
    assert times[-1] == 10_000
    assert 5_555 in times
    assert np.all(np.diff(times) > 0)
    assert times.size < 150


def test_recording_schedule_signs() -> None:
    assert RecordingSchedule().sign_times(100, 1_000).tolist() == list(range(100, 1_001, 5))
    assert RecordingSchedule(sign_start=10, sign_stride=1).sign_times(100, 12).tolist() == [10, 11, 12]
    assert RecordingSchedule().sign_times(100, 50).size == 0


def test_record_trajectories_matches_run() -> None:
    cfg = GameConfig(N=41, P=10, T=3_000, warmup=1_000, seed=5)
    schedule = RecordingSchedule(dense_until=50, points_per_decade=20)

    rec = record_trajectories(cfg, [0, 3, 7], schedule)
    ts = run(cfg)

    assert rec.U.shape == (3, rec.times.size)
    assert rec.times[-1] == 3_000
    assert np.all(np.isnan(rec.x_running[:, rec.times <= 1_000]))
    assert np.allclose(rec.final_x, ts.x_counts[[0, 3, 7]] / 2_000)
    assert set(np.unique(rec.signs)) <= {-1, 1}
    assert rec.tau[-1] == pytest.approx(300.0)


def test_recorded_gaps_are_deterministic() -> None:
    cfg = GameConfig(N=41, P=10, T=1_500, warmup=500, seed=9)

    first = record_trajectories(cfg, [1, 2])
    second = record_trajectories(cfg, [1, 2])

    assert np.array_equal(first.U, second.U)


def test_fail_record_three_strategies() -> None:
    with pytest.raises(WrongSError) as exc_info:
        record_trajectories(GameConfig(N=10, P=2, S=3, T=100, warmup=10), [0])

    assert exc_info.value.code == "mgcavity.game.wrong_s"


def test_fail_record_unknown_agent() -> None:
    with pytest.raises(IndexError):
        record_trajectories(GameConfig(N=10, P=2, T=100, warmup=10), [10])


def test_random_walk_exponent() -> None:
    fit = random_walk_test(_synthetic_record(), t_min=1, t_max=20)

    assert 0.45 <= fit.slope <= 0.55
    assert fit.ci_low < fit.slope < fit.ci_high
    assert fit.points == 20
    assert fit.ensemble == 200


def test_random_walk_selects_agents() -> None:
    rec = _synthetic_record()

    fit = random_walk_test([rec, rec], t_max=20, agents=AgentSelection.NON_FROZEN)

    assert fit.ensemble == 360


def test_late_time_exponent_is_flat() -> None:
    rec = _synthetic_record()

    late = random_walk_test(rec, t_min=10 * rec.P, t_max=50 * rec.P, agents=AgentSelection.NON_FROZEN)

    assert late.slope < 0.2
    assert late.ensemble == 180


def test_fail_random_walk_small_ensemble() -> None:
    with pytest.raises(InsufficientEnsembleError) as exc_info:
        random_walk_test(_synthetic_record(agents=50, frozen=0), t_max=20)

    assert exc_info.value.available == 50
    assert exc_info.value.required == 100


def test_fail_random_walk_few_points() -> None:
    with pytest.raises(ValueError):
        random_walk_test(_synthetic_record(), t_max=5)


def test_excursions_stay_bounded() -> None:
    stats = excursion_test(_synthetic_record())

    assert stats.median_fraction_inside == 1.0
    assert stats.frozen_never_alternate
    assert stats.mean_alternations_per_10P > 10


def test_sign_autocorrelation() -> None:
    signs = np.array([[1, -1] * 50, [1] * 100], dtype=np.int8)

    acf = sign_autocorrelation(signs, 3)

    assert acf[0].tolist() == pytest.approx([1.0, -1.0, 1.0, -1.0], abs=0.03)
    assert np.isnan(acf[1, 1])


def test_binary_noise() -> None:
    rec = _synthetic_record()

    stats = binary_noise_test(rec)

    assert np.all(np.isinf(stats.decorrelation_lag[:20]))
    assert np.all(stats.decorrelation_lag[20:] == 100)
    assert stats.fraction_converged == 1.0
    assert np.all(stats.variance_gap[:20] == 0.0)
    assert np.median(stats.variance_gap[20:]) < 0.05
    assert np.all(stats.mean[:20] == 1.0)


def test_binary_noise_drift_after_warmup() -> None:
    rec = _synthetic_record(warmup=100_000)

    stats = binary_noise_test(rec)

    assert rec.window_midpoint == 150_000
    assert np.all(np.isfinite(stats.drift))


def test_frozen_classification_agrees_with_preferences() -> None:
    cfg = GameConfig(N=101, P=100, T=30_000, warmup=10_000, seed=5)

    rec = record_trajectories(cfg, range(cfg.N))
    stats = binary_noise_test(rec, window_start=cfg.warmup)
    measured = np.abs(strategy_preferences(run(cfg)).x) >= 1.0 - EPS_FROZEN

    assert np.mean(rec.frozen(EPS_FROZEN) == measured) >= 0.95
    assert np.mean((stats.variance == 0) == measured) >= 0.95
    assert stats.fraction_converged == 1.0


def test_binary_noise_drift_on_recorded_run() -> None:
    cfg = GameConfig(N=41, P=10, T=3_000, warmup=2_000, seed=4)

    rec = record_trajectories(cfg, range(10), RecordingSchedule(dense_until=50, points_per_decade=20))
    stats = binary_noise_test(rec)

    assert 2_500 in rec.times
    assert np.all(np.isfinite(rec.x_running_at(rec.window_midpoint)))
    assert np.all(np.isfinite(stats.drift))


def test_pairwise_covariance() -> None:
    signs = np.array([[1, -1, 1, -1], [1, -1, 1, -1], [1, 1, -1, -1]])

    covariance = pairwise_covariance(signs)

    assert covariance[0, 1] == pytest.approx(1.0)
    assert covariance[0, 2] == pytest.approx(0.0)


def test_regime_summary() -> None:
    rows = regime_summary(_synthetic_record())

    assert [row["timescale"] for row in rows] == ["t << P", "t ~ P", "t >> P"]
    assert 0.45 <= rows[0]["value"] <= 0.55
    assert rows[1]["value"] == 1.0
    assert rows[2]["value"] == 1.0
    assert rows[2]["window"] == [20_000, 200_000]


def test_fail_decorrelation_arguments() -> None:
    small = GameConfig(N=20, P=40, T=200, warmup=100)

    with pytest.raises(WrongSError):
        cross_agent_decorrelation(small, small.replace(S=3))
    with pytest.raises(ValueError):
        cross_agent_decorrelation(small, small.replace(P=80))


def test_decorrelation_small_sizes() -> None:
    small = GameConfig(N=20, P=40, T=4_000, warmup=2_000, seed=1)
    large = GameConfig(N=40, P=80, T=4_000, warmup=2_000, seed=1)

    result = cross_agent_decorrelation(small, large, agents=10, pairs=30)

    assert result.pairs == 30
    assert result.small > 0 and result.large > 0


@pytest.mark.slow
def test_timescale_suite() -> None:
    cfg = GameConfig(N=1_000, P=20_000, T=2_000_000 + 1_000_000, warmup=2_000_000)
    records = [record_trajectories(cfg.with_seed(seed), range(100)) for seed in range(2)]

    late = random_walk_test(records, t_min=10 * cfg.P, t_max=50 * cfg.P, agents=AgentSelection.NON_FROZEN)

    assert 0.45 <= random_walk_test(records).slope <= 0.55
    assert late.slope < 0.2
    assert all(excursion_test(rec).median_fraction_inside > 0.9 for rec in records)
    assert all(excursion_test(rec).frozen_never_alternate for rec in records)
    assert all(binary_noise_test(rec).fraction_converged >= 0.9 for rec in records)


@pytest.mark.slow
def test_decorrelation_scales_with_P() -> None:
    small = GameConfig(N=500, P=1_000, T=100_000 + 100_000, warmup=100_000)
    large = GameConfig(N=2_000, P=4_000, T=400_000 + 100_000, warmup=400_000)

    assert 2.0 <= cross_agent_decorrelation(small, large).ratio <= 8.0
