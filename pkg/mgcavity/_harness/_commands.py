import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from escondite import Cache
from hafersack import Hafersack

from mgcavity._cavity import CavitySolution, SweepRow
from mgcavity._dynamics import (
    AgentSelection,
    TrajectoryRecord,
    binary_noise_test,
    excursion_test,
    random_walk_test,
    regime_summary,
)
from mgcavity._engine import GameConfig
from mgcavity._harness._config import CompareSettings, Mode, RunConfig
from mgcavity._harness._io import dump_json, read_json
from mgcavity._harness._services import CavitySolver, DynamicsLab, EnsembleRunner, OutputWriter, RunSummary
from mgcavity._measures import random_baseline_sigma, standard_error_of
from mgcavity.errors import (
    ConfigError,
    InsufficientEnsembleError,
    ParameterMismatchError,
    ReconciliationError,
)

logger = logging.getLogger(__name__)

meta = Hafersack("__mgcavity__")


@dataclass(frozen=True, kw_only=True)
class CommandMetadata:
    KEY = "__mgcavity_command__"
    CACHE_KEY = "__mgcavity_commands__"

    mode: Mode
    description: str


def command[F: Callable[..., Any]](mode: Mode, *, description: str, cache: Cache | None = None) -> Callable[[F], F]:
    """Registers a command function; its parameters are resolved from the run's services by type hint."""

    def inner(func: F) -> F:
        meta.set(func, CommandMetadata.KEY, CommandMetadata(mode=mode, description=description))
        Cache.with_fallback(cache).add(CommandMetadata.CACHE_KEY, func)
        return func

    return inner


def command_metadata(func: Callable[..., Any]) -> CommandMetadata | None:
    if not meta.has(func, CommandMetadata.KEY):
        return None
    return meta.get(func, CommandMetadata.KEY)


def get_command(mode: Mode, cache: Cache | None = None) -> Callable[..., Any]:
    registry = Cache.with_fallback(cache)
    if CommandMetadata.CACHE_KEY in registry:
        for func in registry.get(CommandMetadata.CACHE_KEY, hint=Callable[..., Any]):
            found = command_metadata(func)
            if found is not None and found.mode is mode:
                return func
    raise KeyError(f"No command registered for mode {mode}")


ENSEMBLE_FIELDS = ("sigma", "q_x", "q_A", "q_g", "phi", "gbar", "kurtosis", "sigma2_residual")


def aggregate(summaries: Sequence[RunSummary]) -> dict[str, tuple[float, float]]:
    """Ensemble mean and standard error of each observable over seeds (NaN error for a single seed)."""
    records = [summary.observables.to_record() for summary in summaries]
    result: dict[str, tuple[float, float]] = {}
    for name in ENSEMBLE_FIELDS:
        values = np.array([math.nan if record[name] is None else record[name] for record in records], dtype=float)
        result[name] = (float(np.mean(values)), standard_error_of(values))
    return result


def _write_run(writer: OutputWriter, prefix: str, game: GameConfig, summary: RunSummary) -> None:
    observables = summary.observables
    seeds = [summary.seed]
    writer.json(
        f"{prefix}/observables.json",
        {
            "game": game.with_seed(summary.seed).to_record(),
            "observables": observables.to_record(),
            "x": observables.x,
            "A_mu": observables.A_mu,
            "g_mu": observables.g_mu,
        },
        seeds,
    )
    centers, density = summary.histogram
    writer.csv(f"{prefix}/a_histogram.csv", ("A", "density"), zip(centers, density, strict=True), seeds)
    if (ts := summary.timeseries) is not None:
        writer.csv(
            f"{prefix}/timeseries.csv",
            ("t", "mu", "eta", "A", "g"),
            zip(range(1, ts.T + 1), ts.mu, ts.eta, ts.A, ts.g, strict=True),
            seeds,
        )
        arrays = {"A": ts.A, "g": ts.g, "mu": ts.mu, "eta": ts.eta, "warmup": np.asarray(ts.warmup)}
        if ts.x_counts is not None:
            arrays["x_counts"] = ts.x_counts
        writer.arrays(f"{prefix}/timeseries.npz", arrays, seeds)


@command(Mode.SIMULATE, description="Run the game for every seed and write per-run and ensemble observables")
def cmd_simulate(config: RunConfig, runner: EnsembleRunner, writer: OutputWriter) -> None:
    columns = ["N", "P", "alpha", "runs"]
    for name in ENSEMBLE_FIELDS:
        columns += [name, f"{name}_error"]
    columns.append("random_baseline_sigma")
    rows = []
    all_seeds: list[int] = []
    for game in config.games:
        summaries = runner.simulate(game)
        seeds = [summary.seed for summary in summaries]
        all_seeds += seeds
        prefix = f"N{game.N}_P{game.P}"
        for summary in summaries:
            _write_run(writer, f"{prefix}/seed{summary.seed}", game, summary)
        ensemble = aggregate(summaries)
        baseline = random_baseline_sigma(game.N, game.b, game.noise)
        writer.json(
            f"{prefix}/ensemble.json",
            {
                "game": game.to_record(),
                "ensemble": {name: {"mean": mean, "standard_error": error} for name, (mean, error) in ensemble.items()},
                "random_baseline_sigma": baseline,
            },
            seeds,
        )
        rows.append([game.N, game.P, game.alpha, len(summaries), *np.ravel(list(ensemble.values())), baseline])
        logger.info("N=%d P=%d: sigma=%.4f over %d runs", game.N, game.P, ensemble["sigma"][0], len(summaries))
    writer.csv("ensemble.csv", columns, rows, sorted(set(all_seeds)))
    writer.complete()


@command(Mode.SOLVE, description="Solve the stationary-state equations at each configured alpha")
def cmd_solve(config: RunConfig, solver: CavitySolver, writer: OutputWriter) -> None:
    previous: CavitySolution | None = None
    for alpha in config.alphas:
        previous = solver.solve(alpha, previous)
        writer.json(
            f"solution_alpha{alpha:g}.json",
            {
                "model": config.model.to_record(),
                "price_curvature": config.model.price.curvature(),
                "solution": previous.to_record(),
                "naive_mean_field": solver.naive(alpha).to_record(),
            },
        )
    writer.complete()


SWEEP_COLUMNS = ("alpha", "sigma", "q_x", "q_g", "q_A", "R_x", "R_g", "b", "phi", "converged", "flag")


def _sweep_row(row: SweepRow) -> list[Any]:
    record = row.to_record()
    return [*(record[name] for name in SWEEP_COLUMNS[:-1]), row.error or ""]


@command(Mode.SWEEP, description="Continuation sweep of the stationary state over an alpha grid")
def cmd_sweep(config: RunConfig, solver: CavitySolver, writer: OutputWriter) -> None:
    rows = solver.sweep(config.alpha_grid)
    writer.csv("sweep.csv", SWEEP_COLUMNS, [_sweep_row(row) for row in rows])
    flagged = [row.alpha for row in rows if not row.converged]
    if flagged:
        logger.warning("%d of %d sweep points have no symmetric solution: %s", len(flagged), len(rows), flagged)
    writer.json("sweep.json", {"model": config.model.to_record(), "rows": [row.to_record() for row in rows]})
    writer.complete()


@command(Mode.ALPHA_C, description="Locate the transition point alpha_c")
def cmd_alpha_c(config: RunConfig, solver: CavitySolver, writer: OutputWriter) -> None:
    point = solver.alpha_c()
    writer.json(
        "alpha_c.json",
        {
            "model": config.model.to_record(),
            "alpha_c": point.alpha_c,
            "phi": point.phi,
            "tolerance": config.critical.tolerance,
            "probes": [{"alpha": alpha, "margin": margin} for alpha, margin in point.probes],
        },
    )
    writer.complete()


def _write_trajectories(writer: OutputWriter, rec: TrajectoryRecord) -> None:
    seeds = [rec.seed]
    u_tau = rec.u_tau
    writer.csv(
        f"trajectories/seed{rec.seed}.csv",
        ("t", "agent_id", "U", "u_tau", "x_running"),
        (
            (t, agent, rec.U[j, k], u_tau[j, k], rec.x_running[j, k])
            for k, t in enumerate(rec.times)
            for j, agent in enumerate(rec.agent_ids)
        ),
        seeds,
    )
    writer.csv(
        f"trajectories/seed{rec.seed}_signs.csv",
        ("t", "agent_id", "sign"),
        ((t, agent, rec.signs[j, k]) for k, t in enumerate(rec.sign_times) for j, agent in enumerate(rec.agent_ids)),
        seeds,
    )
    writer.arrays(
        f"trajectories/seed{rec.seed}.npz",
        {
            "agent_ids": rec.agent_ids,
            "times": rec.times,
            "U": rec.U,
            "x_running": rec.x_running,
            "sign_times": rec.sign_times,
            "signs": rec.signs,
        },
        seeds,
    )


def _late_growth(records: Sequence[TrajectoryRecord]) -> dict[str, Any] | None:
    P = records[0].P
    try:
        fit = random_walk_test(records, t_min=10 * P, t_max=50 * P, agents=AgentSelection.NON_FROZEN, min_ensemble=1)
    except (InsufficientEnsembleError, ValueError) as err:
        logger.info("No late-time growth fit: %s", err)
        return None
    return asdict(fit)


@command(Mode.DYNAMICS, description="Record score trajectories and test the three dynamical regimes")
def cmd_dynamics(config: RunConfig, lab: DynamicsLab, writer: OutputWriter) -> None:
    game = config.game
    records = lab.record(game)
    seeds = [rec.seed for rec in records]
    for rec in records:
        _write_trajectories(writer, rec)

    regimes = regime_summary(records, min_ensemble=config.dynamics.min_ensemble)
    short = random_walk_test(records, min_ensemble=config.dynamics.min_ensemble)
    excursions = [excursion_test(rec) for rec in records]
    binary = [binary_noise_test(rec) for rec in records]
    writer.json(
        "regime_summary.json",
        {
            "game": game.to_record(),
            "regimes": regimes,
            "short_time_growth": asdict(short),
            "late_time_growth": _late_growth(records),
            "excursions": {
                "median_fraction_inside": float(np.nanmedian([e.median_fraction_inside for e in excursions])),
                "mean_alternations_per_10P": float(np.nanmean([e.mean_alternations_per_10P for e in excursions])),
                "frozen_never_alternate": all(e.frozen_never_alternate for e in excursions),
            },
            "binary_noise": {
                "fraction_converged": float(np.mean([b.fraction_converged for b in binary])),
                "median_variance_gap": float(np.median(np.concatenate([b.variance_gap for b in binary]))),
                "frozen_fraction": float(np.mean(np.concatenate([b.frozen for b in binary]))),
            },
        },
        seeds,
    )
    if config.dynamics.decorrelation:
        result = lab.decorrelation(game)
        writer.json(
            "decorrelation.json",
            {
                "P_small": game.P,
                "P_large": game.P * config.dynamics.size_factor,
                "alpha": game.alpha,
                "mean_abs_covariance_small": result.small,
                "mean_abs_covariance_large": result.large,
                "ratio": result.ratio,
                "pairs": result.pairs,
            },
            [game.seed],
        )
    writer.complete()


@dataclass(frozen=True, kw_only=True)
class ReconciliationCheck:
    name: str
    theory: float
    simulation: float
    standard_error: float
    threshold: float
    passed: bool

    def to_row(self) -> list[Any]:
        return [self.name, self.theory, self.simulation, self.standard_error, self.threshold, self.passed]


def _market_identity(record: dict[str, Any]) -> dict[str, Any]:
    """Price and noise parameters, without the operating range (which only bounds validity checks)."""
    price = {key: value for key, value in record["price"].items() if key != "operating_range"}
    return {"price": price, "noise": record["noise"]}


def _reference_solution(config: RunConfig, solver: CavitySolver) -> CavitySolution:
    game = config.game
    path = config.compare.solution_file
    if path is None:
        return solver.solve(game.alpha)
    try:
        payload = read_json(path)
        solution = CavitySolution.from_record(payload["solution"])
    except (OSError, KeyError, TypeError, ValueError) as err:
        raise ConfigError(config.source, "compare.solution_file", f"cannot read a solution from {path}: {err}") from err
    mismatches: dict[str, tuple[object, object]] = {}
    if not math.isclose(solution.alpha, game.alpha, rel_tol=1e-9):
        mismatches["alpha"] = (solution.alpha, game.alpha)
    expected = _market_identity(config.model.to_record())
    stored = _market_identity(payload.get("model", {"price": {}, "noise": {}}))
    for key in ("price", "noise"):
        if dump_json(stored[key]) != dump_json(expected[key]):
            mismatches[key] = (stored[key], expected[key])
    if mismatches:
        raise ParameterMismatchError(mismatches)
    return solution


def reconcile(
    solution: CavitySolution,
    summaries: Sequence[RunSummary],
    settings: CompareSettings,
) -> list[ReconciliationCheck]:
    """Theory against ensemble averages: order parameters within a tolerance, mean price and shape of A + eta."""
    ensemble = aggregate(summaries)
    theory = solution.to_record()
    checks = []
    for name in ("sigma", "q_x", "q_A", "phi"):
        mean, error = ensemble[name]
        checks.append(
            ReconciliationCheck(
                name=name,
                theory=theory[name],
                simulation=mean,
                standard_error=error,
                threshold=settings.tolerance,
                passed=abs(mean - theory[name]) <= settings.tolerance,
            )
        )
    gbar, gbar_error = ensemble["gbar"]
    if math.isnan(gbar_error):
        gbar_error = summaries[0].observables.gbar_error
    checks.append(
        ReconciliationCheck(
            name="gbar",
            theory=0.0,
            simulation=gbar,
            standard_error=gbar_error,
            threshold=settings.gbar_errors * gbar_error,
            passed=abs(gbar) <= settings.gbar_errors * gbar_error,
        )
    )
    distances = [summary.ks for summary in summaries if summary.ks is not None]
    ks = float(np.mean(distances))
    checks.append(
        ReconciliationCheck(
            name="ks_distance",
            theory=0.0,
            simulation=ks,
            standard_error=standard_error_of(distances),
            threshold=settings.ks_threshold,
            passed=ks < settings.ks_threshold,
        )
    )
    return checks


@command(Mode.COMPARE, description="Reconcile an ensemble of simulations with the stationary-state solution")
def cmd_compare(config: RunConfig, solver: CavitySolver, runner: EnsembleRunner, writer: OutputWriter) -> None:
    solution = _reference_solution(config, solver)
    game = config.game.replace(b=solution.b) if config.auto_bias else config.game
    summaries = runner.simulate(game, reference=(solution.b, solution.sigma))
    seeds = [summary.seed for summary in summaries]
    checks = reconcile(solution, summaries, config.compare)
    gbar = next(check.simulation for check in checks if check.name == "gbar")
    writer.json(
        "compare.json",
        {
            "game": game.to_record(),
            "solution": solution.to_record(),
            "checks": [asdict(check) for check in checks],
            "passed": all(check.passed for check in checks),
            "price_curvature": config.model.price.curvature(),
            "gbar_sign": int(np.sign(gbar)),
            "bias_offset": game.b - solution.b,
        },
        seeds,
    )
    writer.csv(
        "compare.csv",
        ("quantity", "theory", "simulation", "standard_error", "threshold", "passed"),
        [check.to_row() for check in checks],
        seeds,
    )
    failed = [check.name for check in checks if not check.passed]
    if failed:
        raise ReconciliationError(failed)
    writer.complete()
    logger.info("Theory and simulation agree at alpha=%g over %d runs", game.alpha, len(summaries))
