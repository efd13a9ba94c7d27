import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest
from escondite import Cache

from mgcavity import GameConfig, MarketModel, RunConfig, main, solve_self_consistent
from mgcavity._cavity import CavitySolution
from mgcavity._harness import (
    CliOverrides,
    CompareSettings,
    Mode,
    OutputWriter,
    Provenance,
    ReconciliationCheck,
    aggregate,
    cmd_simulate,
    cmd_solve,
    command,
    command_metadata,
    exit_code,
    get_command,
    load_config,
    parse_config,
    read_arrays,
    read_csv,
    read_json,
    reconcile,
    simulate_one,
    write_arrays,
    write_csv,
)
from mgcavity.errors import (
    ConfigError,
    InsufficientCoverageError,
    NotConvergedError,
    ParameterMismatchError,
    ReconciliationError,
    WrongSError,
)

SIMULATE = """mode = "simulate"

[game]
N = 21
P = 4
T = 3000
warmup = 1000

[ensemble]
size = 2

[output]
histogram_bins = 11
"""

SOLVE = """mode = "solve"

[solver]
alpha = [1.0, 2.0]
"""

CONFIGS = Path(__file__).parent.parent / "configs"


def _write(tmp_path: Path, text: str, name: str = "run.toml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_simulate_config() -> None:
    config = parse_config(SIMULATE)

    assert config.mode is Mode.SIMULATE
    assert config.game.N == 21
    assert config.game.alpha == pytest.approx(4 / 21)
    assert config.ensemble.size == 2
    assert config.seeds_for(config.game) == (0, 1)
    assert config.output.histogram_bins == 11
    assert config.game.price.operating_range == (-8.0, 8.0)


def test_parse_window_per_P_and_alpha() -> None:
    config = parse_config('mode = "simulate"\n[game]\nN = 100\nalpha = 0.5\nwindow_per_P = 100\n')

    assert config.game.P == 50
    assert config.game.warmup == 10_000
    assert config.game.T == 15_000


def test_parse_P_grid() -> None:
    config = parse_config('mode = "simulate"\n[game]\nN = 100\nT = 20000\n[sweep]\nP_grid = [10, 20]\n')

    assert [game.P for game in config.games] == [10, 20]


def test_parse_price_and_noise() -> None:
    config = parse_config(
        'mode = "solve"\n[game.price]\nkind = "polynomial"\ncoeffs = [1.0, 0.05, 0.05]\noperating_range = [-4.0, 4.0]\n'
        '[game.noise]\nkind = "gaussian"\nsigma = 0.5\n[solver]\nalpha = 1.0\n'
    )

    assert config.model.noise.variance() == 0.25
    assert config.model.price.operating_range == (-4.0, 4.0)
    assert config.alphas == (1.0,)


def test_fail_unknown_setting() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(SIMULATE + "\n[game.extra]\n", source="run.toml")
    with pytest.raises(ConfigError) as field_info:
        parse_config(SIMULATE.replace("warmup = 1000", "warmup = 1000\ncolour = 1"), source="run.toml")

    assert exc_info.value.code == "mgcavity.config.invalid"
    assert field_info.value.field == "game.colour"
    assert field_info.value.line == 8
    assert str(field_info.value).startswith("[mgcavity.config.invalid] run.toml:8 [game.colour]")


def test_fail_invalid_toml() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config('mode = "solve"\n[solver\nalpha = 1\n')

    assert exc_info.value.line == 2


def test_fail_wrong_type() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(SIMULATE.replace("N = 21", 'N = "many"'))

    assert exc_info.value.field == "game.N"
    assert "expected int" in exc_info.value.reason


def test_fail_both_or_neither_length() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config('mode = "simulate"\n[game]\nN = 21\nP = 4\n')

    assert exc_info.value.field == "game.T"


def test_fail_invalid_game() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(SIMULATE.replace("warmup = 1000", "warmup = 5000"))

    assert exc_info.value.field == "game.T"
    assert exc_info.value.line == 6


def test_fail_auto_bias_outside_compare() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(SIMULATE.replace("P = 4", 'P = 4\nb = "auto"'))

    assert exc_info.value.field == "game.b"


def test_fail_dynamics_with_three_strategies() -> None:
    with pytest.raises(WrongSError) as exc_info:
        parse_config(SIMULATE.replace('"simulate"', '"dynamics"').replace("P = 4", "P = 4\nS = 3"))

    assert exc_info.value.S == 3
    assert exit_code(exc_info.value) == 2


def test_fail_empty_ensemble() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(SIMULATE.replace("size = 2", "size = 0"))

    assert exc_info.value.field == "ensemble.size"


def test_fail_unsorted_alphas() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config('mode = "sweep"\n[sweep]\nalpha_grid = [1.0, 0.5]\n')

    assert "strictly increasing" in exc_info.value.reason


def test_fail_mode_mismatch() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(SOLVE, overrides=CliOverrides(mode=Mode.SWEEP))

    assert exc_info.value.field == "mode"


def test_fail_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError) as exc_info:
        load_config(tmp_path / "missing.toml")

    assert "cannot read" in exc_info.value.reason


def test_overrides() -> None:
    config = parse_config(SIMULATE, overrides=CliOverrides(workers=3, out=Path("elsewhere"), seed=40))

    assert config.ensemble.workers == 3
    assert config.output.directory == Path("elsewhere")
    assert config.seeds_for(config.game) == (40, 41)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda path: path.stem)
def test_shipped_configs_accept_overrides(path: Path, tmp_path: Path) -> None:
    plain = load_config(path)
    config = load_config(path, CliOverrides(workers=4, out=tmp_path / "out"))

    assert config.ensemble.workers == 4
    assert config.output.directory == tmp_path / "out"
    assert config.config_hash == plain.config_hash


def test_config_hash_ignores_execution_details() -> None:
    base = parse_config(SIMULATE)

    assert parse_config(SIMULATE, overrides=CliOverrides(workers=4, out=Path("x"))).config_hash == base.config_hash
    assert parse_config(SIMULATE, overrides=CliOverrides(seed=5)).config_hash != base.config_hash


def test_exit_codes() -> None:
    assert exit_code(ConfigError("run.toml", None, "bad")) == 2
    assert exit_code(ParameterMismatchError({"alpha": (1.0, 2.0)})) == 2
    assert exit_code(NotConvergedError(1.0, 10, 0.1)) == 3
    assert exit_code(ReconciliationError(["sigma"])) == 4
    assert exit_code(InsufficientCoverageError([0], 50)) == 1


def test_command_registry() -> None:
    assert get_command(Mode.SIMULATE) is cmd_simulate
    assert get_command(Mode.SOLVE) is cmd_solve
    assert {command_metadata(get_command(mode)).mode for mode in Mode} == set(Mode)


def test_command_registry_with_cache() -> None:
    cache = Cache()

    @command(Mode.SOLVE, description="Solve nothing", cache=cache)
    def solve_nothing(config: RunConfig) -> None: ...

    assert get_command(Mode.SOLVE, cache) is solve_nothing
    assert command_metadata(solve_nothing).description == "Solve nothing"
    with pytest.raises(KeyError):
        get_command(Mode.SWEEP, cache)


def test_csv_and_arrays_carry_provenance(tmp_path: Path) -> None:
    provenance = Provenance(config_hash="abc", seeds=(1, 2), version="0.1.0")

    write_csv(tmp_path / "table.csv", ("x", "y"), [(0.1, 2), (float("nan"), None)], provenance)
    write_arrays(tmp_path / "first.npz", {"A": np.arange(5.0)}, provenance)
    write_arrays(tmp_path / "second.npz", {"A": np.arange(5.0)}, provenance)
    meta, rows = read_csv(tmp_path / "table.csv")
    array_meta, arrays = read_arrays(tmp_path / "first.npz")

    assert meta == {"config_hash": "abc", "seeds": [1, 2], "version": "0.1.0"}
    assert rows[0] == {"x": "0.1", "y": "2"}
    assert rows[1] == {"x": "nan", "y": ""}
    assert array_meta == meta
    assert arrays["A"].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert (tmp_path / "first.npz").read_bytes() == (tmp_path / "second.npz").read_bytes()


def test_output_writer_manifest(tmp_path: Path) -> None:
    config = parse_config(SOLVE, overrides=CliOverrides(out=tmp_path / "out"))

    with OutputWriter(config) as writer:
        writer.json("nested/result.json", {"value": 1.5}, [3])

    manifest = read_json(tmp_path / "out" / "manifest.json")
    result = read_json(tmp_path / "out" / "nested" / "result.json")
    assert manifest["files"] == ["nested/result.json"]
    assert manifest["completed"] is False
    assert manifest["config_hash"] == config.config_hash
    assert result["meta"]["seeds"] == [3]
    assert result["value"] == 1.5


def test_aggregate_and_reconcile() -> None:
    game = GameConfig(N=41, P=4, T=3_000, warmup=1_000)
    summaries = [simulate_one(game.with_seed(seed), bins=11, reference=(0.0, 1.0)) for seed in (0, 1)]
    ensemble = aggregate(summaries)
    sigma = ensemble["sigma"][0]
    theory = CavitySolution(
        alpha=game.alpha,
        q_x=ensemble["q_x"][0],
        q_g=ensemble["q_g"][0],
        q_A=ensemble["q_A"][0],
        R_x=-0.1,
        R_g=-1.0,
        b=0.0,
        phi=ensemble["phi"][0],
        sigma=sigma,
        sigma_eta2=0.0,
        price_root=0.0,
        converged=True,
        iterations=1,
        residual=0.0,
    )

    checks = {check.name: check for check in reconcile(theory, summaries, CompareSettings())}
    wrong = {
        check.name: check
        for check in reconcile(dataclasses.replace(theory, sigma=sigma + 0.2), summaries, CompareSettings())
    }

    assert set(checks) == {"sigma", "q_x", "q_A", "phi", "gbar", "ks_distance"}
    assert all(checks[name].passed for name in ("sigma", "q_x", "q_A", "phi"))
    assert not wrong["sigma"].passed
    assert np.isfinite(ensemble["sigma"][1])
    assert isinstance(checks["sigma"], ReconciliationCheck)
    assert checks["sigma"].to_row()[0] == "sigma"


def test_main_solve(tmp_path: Path) -> None:
    config = _write(tmp_path, SOLVE)

    code = main(["solve", "--config", str(config), "--out", str(tmp_path / "out"), "--log-level", "WARNING"])

    assert code == 0
    first = read_json(tmp_path / "out" / "solution_alpha1.json")
    manifest = read_json(tmp_path / "out" / "manifest.json")
    assert first["solution"]["sigma"] == pytest.approx(0.588, abs=0.01)
    assert first["naive_mean_field"]["phi"] == 1.0
    assert first["price_curvature"] == 0
    assert manifest["completed"] is True
    assert manifest["files"] == ["solution_alpha1.json", "solution_alpha2.json"]


def test_main_sweep_flags_rows(tmp_path: Path) -> None:
    config = _write(tmp_path, 'mode = "sweep"\n[sweep]\nalpha_grid = [0.2, 1.0]\n')

    code = main(["sweep", "--config", str(config), "--out", str(tmp_path / "out"), "--log-level", "ERROR"])

    assert code == 0
    _, rows = read_csv(tmp_path / "out" / "sweep.csv")
    assert [row["converged"] for row in rows] == ["False", "True"]
    assert rows[0]["flag"].startswith("mgcavity.cavity.")
    assert rows[1]["flag"] == ""


def test_main_simulate(tmp_path: Path) -> None:
    config = _write(tmp_path, SIMULATE.replace("histogram_bins = 11", "histogram_bins = 11\ntimeseries = true"))

    code = main(["simulate", "--config", str(config), "--out", str(tmp_path / "out"), "--log-level", "WARNING"])

    assert code == 0
    out = tmp_path / "out"
    meta, rows = read_csv(out / "ensemble.csv")
    assert meta["seeds"] == [0, 1]
    assert rows[0]["runs"] == "2"
    assert float(rows[0]["random_baseline_sigma"]) == pytest.approx(1.0)
    observables = read_json(out / "N21_P4" / "seed1" / "observables.json")
    assert observables["game"]["seed"] == 1
    assert len(observables["x"]) == 21
    _, arrays = read_arrays(out / "N21_P4" / "seed0" / "timeseries.npz")
    assert arrays["A"].shape == (3_000,)
    _, histogram = read_csv(out / "N21_P4" / "seed0" / "a_histogram.csv")
    assert len(histogram) == 11


def test_main_outputs_do_not_depend_on_workers(tmp_path: Path) -> None:
    config = _write(tmp_path, SIMULATE)

    for workers in (1, 2):
        out = tmp_path / f"workers{workers}"
        assert main(["simulate", "--config", str(config), "--out", str(out), "--workers", str(workers)]) == 0

    for name in ("ensemble.csv", "N21_P4/ensemble.json", "N21_P4/seed1/observables.json", "manifest.json"):
        assert (tmp_path / "workers1" / name).read_bytes() == (tmp_path / "workers2" / name).read_bytes()


def test_main_rejects_config_before_writing(tmp_path: Path) -> None:
    config = _write(tmp_path, SIMULATE.replace("size = 2", "size = 2\nflavour = 1"))

    code = main(["simulate", "--config", str(config), "--out", str(tmp_path / "out")])

    assert code == 2
    assert not (tmp_path / "out").exists()


def test_main_compare_parameter_mismatch(tmp_path: Path) -> None:
    solution = {
        "alpha": 1.0,
        "q_x": 0.6,
        "q_g": 0.1,
        "q_A": 0.05,
        "R_x": -0.2,
        "R_g": -1.3,
        "b": 0.0,
        "phi": 0.43,
        "sigma": 0.59,
        "sigma_eta2": 0.0,
        "price_root": 0.0,
        "converged": True,
        "iterations": 10,
        "residual": 1e-12,
    }
    model = {"price": {"kind": "linear", "operating_range": [-1.0, 1.0]}, "noise": {"kind": "none"}}
    (tmp_path / "solution.json").write_text(json.dumps({"model": model, "solution": solution}), encoding="utf-8")
    config = _write(
        tmp_path,
        'mode = "compare"\n[game]\nN = 41\nP = 20\nT = 4000\nwarmup = 2000\n'
        '[compare]\nsolution_file = "solution.json"\n',
    )

    code = main(["compare", "--config", str(config), "--out", str(tmp_path / "out")])

    assert code == 2
    assert not (tmp_path / "out" / "compare.json").exists()


def test_main_compare_failure_leaves_run_incomplete(tmp_path: Path) -> None:
    config = _write(
        tmp_path,
        'mode = "compare"\n[game]\nN = 41\nalpha = 1.0\nwindow_per_P = 100\n[ensemble]\nsize = 2\n'
        "[compare]\ntolerance = 1e-12\n",
    )

    code = main(["compare", "--config", str(config), "--out", str(tmp_path / "out")])

    assert code == 4
    assert read_json(tmp_path / "out" / "compare.json")["passed"] is False
    assert read_json(tmp_path / "out" / "manifest.json")["completed"] is False


@pytest.mark.slow
def test_main_compare_agrees_at_one(tmp_path: Path) -> None:
    config = _write(
        tmp_path,
        'mode = "compare"\n[game]\nN = 256\nalpha = 1.0\nwindow_per_P = 400\n[ensemble]\nsize = 20\nworkers = 4\n',
    )

    code = main(["compare", "--config", str(config), "--out", str(tmp_path / "out")])

    assert code == 0
    assert read_json(tmp_path / "out" / "compare.json")["passed"] is True


def _simulated(config: Path, out: Path) -> dict[float, tuple[float, float]]:
    assert main(["simulate", "--config", str(config), "--out", str(out), "--workers", "8"]) == 0
    _, rows = read_csv(out / "ensemble.csv")
    return {float(row["alpha"]): (float(row["sigma"]), float(row["sigma_error"])) for row in rows}


@pytest.mark.slow
def test_simulated_volatility_matches_theory(tmp_path: Path) -> None:
    simulated = _simulated(CONFIGS / "simulate_agreement.toml", tmp_path / "out")

    assert sorted(simulated) == [0.5, 1.0, 2.0, 4.0, 8.0]
    for alpha, (sigma, _) in simulated.items():
        assert sigma == pytest.approx(solve_self_consistent(alpha, MarketModel.linear()).sigma, abs=0.05)


@pytest.mark.slow
def test_volatility_collapses_across_sizes(tmp_path: Path) -> None:
    small = _simulated(CONFIGS / "simulate_collapse_512.toml", tmp_path / "small")
    large = _simulated(CONFIGS / "simulate_collapse_2048.toml", tmp_path / "large")

    assert sorted(small) == sorted(large) == [1.0, 2.0]
    for alpha in small:
        (sigma_small, error_small), (sigma_large, error_large) = small[alpha], large[alpha]
        assert abs(sigma_small - sigma_large) <= 3.0 * np.hypot(error_small, error_large)


@pytest.mark.slow
def test_distribution_matches_prediction_at_half(tmp_path: Path) -> None:
    code = main(["compare", "--config", str(CONFIGS / "compare_alpha05.toml"), "--out", str(tmp_path / "out")])

    checks = {check["name"]: check for check in read_json(tmp_path / "out" / "compare.json")["checks"]}
    assert code == 0
    assert checks["ks_distance"]["simulation"] < 0.02
