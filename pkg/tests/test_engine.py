import time

import numpy as np
import pytest

from mgcavity import (
    GameConfig,
    GameState,
    GaussianNoise,
    LinearPrice,
    PolynomialPrice,
    StrategyTable,
    cavity_experiment,
    draw_strategies,
    init_scores,
    run,
    step,
    strategy_preferences,
)
from mgcavity._engine import StreamPurpose, default_warmup, random_stream
from mgcavity._measures import batch_means_error, conditional_market, standard_error_of
from mgcavity.errors import InvalidGameConfigError, OutOfRangeError, WrongSError


def _state(scores: list[list[float]]) -> GameState:
    state = GameState(scores=np.asarray(scores, dtype=np.float64), best=np.zeros(len(scores), dtype=np.intp))
    state.reselect()
    return state


def test_default_warmup() -> None:
    assert default_warmup(10) == 10_000
    assert default_warmup(1_000) == 100_000
    assert GameConfig(N=10, P=5, T=20_000).warmup == 10_000


def test_fail_invalid_game_config() -> None:
    with pytest.raises(InvalidGameConfigError) as exc_info:
        GameConfig(N=0, P=5, T=100, warmup=10)

    assert exc_info.value.code == "mgcavity.game.invalid_config"
    assert exc_info.value.field == "N"


@pytest.mark.parametrize(
    ("changes", "field"),
    [
        ({"S": 1}, "S"),
        ({"T": 10}, "T"),
        ({"b": 4.0}, "b"),
        ({"seed": -1}, "seed"),
        ({"spot_checks": -1}, "spot_checks"),
    ],
)
def test_fail_game_config_fields(changes: dict[str, float], field: str) -> None:
    base = {"N": 16, "P": 4, "T": 100, "warmup": 10}

    with pytest.raises(InvalidGameConfigError) as exc_info:
        GameConfig(**(base | changes))

    assert exc_info.value.field == field


def test_strategy_draw_bias() -> None:
    cfg = GameConfig(N=400, P=50, T=100, warmup=0, b=10.0)
    table = draw_strategies(cfg, random_stream(0, StreamPurpose.STRATEGIES))

    assert table.entries.shape == (400, 2, 50)
    assert cfg.plus_probability == pytest.approx(0.75)
    assert np.mean(table.entries == 1) == pytest.approx(0.75, abs=0.01)


def test_omega_and_xi() -> None:
    table = StrategyTable.from_entries(np.array([[[1, 1], [1, -1]], [[-1, -1], [1, 1]]]))

    assert table.omega.tolist() == [[1, 0], [0, 0]]
    assert table.xi.tolist() == [[0, 1], [-1, -1]]


def test_fail_omega_with_three_strategies() -> None:
    table = StrategyTable.from_entries(np.ones((2, 3, 4), dtype=np.int8))

    with pytest.raises(WrongSError) as exc_info:
        _ = table.omega

    assert exc_info.value.S == 3


def test_opposite_agents_cancel() -> None:
    cfg = GameConfig(N=2, P=1, T=10, warmup=0)
    table = StrategyTable.from_entries(np.array([[[1], [1]], [[-1], [-1]]]))
    state = _state([[0.2, 0.1], [0.3, 0.4]])
    before = state.scores.copy()

    for _ in range(5):
        outcome = step(state, table, cfg, 0, 0.0)
        assert outcome.A == 0.0
        assert outcome.g == 0.0

    assert np.array_equal(state.scores, before)


def test_single_agent_oscillates() -> None:
    cfg = GameConfig(N=1, P=1, T=10, warmup=0)
    table = StrategyTable.from_entries(np.array([[[1], [-1]]]))
    state = _state([[0.5, 0.0]])

    first = step(state, table, cfg, 0, 0.0)
    assert first.A == 1.0
    assert first.g == 1.0
    assert state.scores.tolist() == [[-0.5, 1.0]]

    second = step(state, table, cfg, 0, 0.0)
    third = step(state, table, cfg, 0, 0.0)
    assert second.A == -1.0
    assert third.A == 1.0


def test_excluded_agent_leaves_market() -> None:
    cfg = GameConfig(N=2, P=1, T=10, warmup=0)
    table = StrategyTable.from_entries(np.array([[[1], [1]], [[1], [-1]]]))

    full = step(_state([[0.0, 0.0], [1.0, 0.0]]), table, cfg, 0, 0.0)
    cavity = step(_state([[0.0, 0.0], [1.0, 0.0]]), table, cfg, 0, 0.0, excluded_agent=0)

    assert full.A - cavity.A == pytest.approx(1.0 / np.sqrt(2.0))


def test_ties_are_counted() -> None:
    state = _state([[0.0, 0.0], [1.0, 0.0]])

    assert state.best.tolist() == [0, 0]
    assert state.ties == 1


@pytest.mark.parametrize("S", [2, 3])
def test_reselect_matches_argmax(S: int) -> None:
    rng = np.random.default_rng(3)
    scores = rng.integers(-2, 3, size=(500, S)).astype(np.float64)
    state = GameState(scores=scores, best=np.zeros(500, dtype=np.intp))
    state.reselect()

    top = scores.max(axis=1, keepdims=True)
    assert state.best.tolist() == np.argmax(scores, axis=1).tolist()
    assert state.ties == int(np.count_nonzero(scores == top)) - 500


def test_init_scores_are_tiny() -> None:
    cfg = GameConfig(N=50, P=5, T=100, warmup=0)
    state = init_scores(cfg, random_stream(cfg.seed, StreamPurpose.SCORES))

    assert np.max(np.abs(state.scores)) < 1e-8
    assert state.t == 0


def test_run_is_reproducible() -> None:
    cfg = GameConfig(N=31, P=8, T=2_000, warmup=400, seed=7)

    first = run(cfg)
    second = run(cfg)
    other = run(cfg.with_seed(8))

    assert np.array_equal(first.A, second.A)
    assert np.array_equal(first.x_counts, second.x_counts)
    assert not np.array_equal(first.A, other.A)


def test_run_records_everything() -> None:
    cfg = GameConfig(N=21, P=4, T=1_000, warmup=200, spot_checks=10)
    ts = run(cfg)

    assert ts.T == 1_000
    assert ts.window_length == 800
    assert ts.n_batches == 20
    assert ts.x_batches is not None and ts.x_batches.shape == (20, 21)
    assert int(ts.per_mu.count.sum()) == 800
    assert ts.spot_actions is not None and ts.spot_actions.shape == (10, 21)
    # excess demand is the normalized sum of the recorded decisions
    expected = ts.spot_actions.sum(axis=1) / np.sqrt(21)
    assert np.allclose(ts.A[ts.spot_steps], expected)
    assert np.all(np.abs(ts.x_counts) <= 800)


def test_run_with_three_strategies() -> None:
    ts = run(GameConfig(N=20, P=4, S=3, T=500, warmup=100))

    assert ts.x_counts is None
    assert ts.A.shape == (500,)


def test_fail_run_outside_price_range() -> None:
    cfg = GameConfig(N=400, P=2, T=100, warmup=0, price=PolynomialPrice([1.0], (-0.1, 0.1)))

    with pytest.raises(OutOfRangeError) as exc_info:
        run(cfg)

    assert exc_info.value.t is not None
    assert abs(exc_info.value.x) > 0.1


def test_fail_step_outside_price_range() -> None:
    cfg = GameConfig(N=1, P=1, T=10, warmup=0, price=PolynomialPrice([1.0], (-0.5, 0.5)))
    table = StrategyTable.from_entries(np.array([[[1], [-1]]]))
    state = _state([[0.5, 0.0]])

    with pytest.raises(OutOfRangeError) as exc_info:
        step(state, table, cfg, 0, 0.25)

    assert (exc_info.value.t, exc_info.value.A, exc_info.value.eta) == (1, 1.0, 0.25)
    assert exc_info.value.x == 1.25
    assert state.t == 0


@pytest.mark.slow
def test_score_update_throughput() -> None:
    cfg = GameConfig(N=4001, P=512, T=5_000, warmup=1_000, price=LinearPrice((-100.0, 100.0)), spot_checks=0)
    start = time.perf_counter()
    run(cfg)
    elapsed = time.perf_counter() - start

    assert cfg.N * cfg.S * cfg.T / elapsed >= 1e8


def test_no_learning_plays_at_random() -> None:
    # one quenched A per signal, so the disorder average needs many signals and seeds
    second_moments = [
        float(np.mean(run(GameConfig(N=101, P=4000, T=40_000, warmup=0, learning=False, seed=seed)).A ** 2))
        for seed in range(5)
    ]

    assert np.mean(second_moments) == pytest.approx(1.0, abs=5 * standard_error_of(second_moments))


def test_minority_mechanism() -> None:
    cfg = GameConfig(N=101, P=50, T=12_000, warmup=2_000, noise=GaussianNoise(0.5), seed=3)
    ts = run(cfg)
    window = ts.window
    payoff = -ts.A[window] * ts.g[window] / np.sqrt(cfg.N)

    assert np.array_equal(np.sign(ts.A[ts.spot_steps]), np.sign(ts.spot_actions.sum(axis=1)))
    assert np.mean(payoff) <= 3 * batch_means_error(payoff, 10 * cfg.P)


def test_cavity_experiment_shares_disorder() -> None:
    cfg = GameConfig(N=2, P=1, T=1, warmup=0)
    pair = cavity_experiment(cfg, 0)
    table = draw_strategies(cfg, random_stream(cfg.seed, StreamPurpose.STRATEGIES))

    played = pair.full.spot_actions[0, 0]
    assert pair.delta_A[0] == pytest.approx(played / np.sqrt(2.0))
    assert pair.full.mu.tolist() == pair.cavity.mu.tolist()
    assert played in table.entries[0, :, 0]


def test_fail_cavity_experiment_bad_agent() -> None:
    with pytest.raises(IndexError):
        cavity_experiment(GameConfig(N=4, P=1, T=10, warmup=0), 4)
    with pytest.raises(ValueError):
        cavity_experiment(GameConfig(N=1, P=1, T=10, warmup=0), 0)


@pytest.mark.slow
def test_cavity_impact_on_mean_price() -> None:
    N, P = 512, 4096
    shifts = []
    for seed in range(20):
        pair = cavity_experiment(GameConfig(N=N, P=P, T=120 * P, warmup=100 * P, seed=seed), seed)
        shifts.append(abs(float(np.mean(pair.delta_g[pair.full.window]))))

    assert np.mean(shifts) <= 3 / np.sqrt(N)


@pytest.mark.slow
def test_cavity_impact_frozen_exceeds_fickle() -> None:
    impacts: dict[str, list[float]] = {"frozen": [], "fickle": []}
    for seed in range(5):
        cfg = GameConfig(N=32, P=32, T=3_200 + 200_000, warmup=3_200, seed=seed)
        x = strategy_preferences(run(cfg)).x
        for kind, agent in (("frozen", int(np.argmax(np.abs(x)))), ("fickle", int(np.argmin(np.abs(x))))):
            pair = cavity_experiment(cfg, agent)
            shift = conditional_market(pair.full, 0.0).A_mu - conditional_market(pair.cavity, 0.0).A_mu
            impacts[kind].append(float(np.mean(shift**2)))

    assert np.mean(impacts["frozen"]) > np.mean(impacts["fickle"])
