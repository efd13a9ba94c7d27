import hashlib
import json
import re
import tomllib
from dataclasses import asdict, dataclass, field
from enum import StrEnum, unique
from itertools import pairwise
from pathlib import Path
from typing import Any

import numpy as np

from mgcavity._cavity import SolverSettings
from mgcavity._engine import GameConfig, default_warmup
from mgcavity._market import MarketModel, noise_from_record, price_from_record
from mgcavity.errors import (
    ConfigError,
    InvalidGameConfigError,
    InvalidNoiseModelError,
    InvalidPriceFunctionError,
    WrongSError,
)

_MISSING: Any = object()


@unique
class Mode(StrEnum):
    SIMULATE = "simulate"
    SOLVE = "solve"
    SWEEP = "sweep"
    DYNAMICS = "dynamics"
    COMPARE = "compare"
    ALPHA_C = "alpha-c"


@dataclass(frozen=True, kw_only=True)
class CliOverrides:
    mode: Mode | None = None
    workers: int | None = None
    out: Path | None = None
    seed: int | None = None


@dataclass(frozen=True, kw_only=True)
class EnsembleSettings:
    size: int = 1
    workers: int = 1


@dataclass(frozen=True, kw_only=True)
class CriticalSearch:
    low: float = 0.05
    high: float = 1.0
    tolerance: float = 1e-4


@dataclass(frozen=True, kw_only=True)
class DynamicsSettings:
    agents: int = 100
    dense_until: int = 1_000
    points_per_decade: int = 100
    sign_stride: int | None = None
    min_ensemble: int = 100
    decorrelation: bool = False
    decorrelation_agents: int = 64
    decorrelation_pairs: int = 1_000
    size_factor: int = 4


@dataclass(frozen=True, kw_only=True)
class CompareSettings:
    tolerance: float = 0.05
    ks_threshold: float = 0.02
    gbar_errors: float = 3.0
    solution_file: Path | None = None


@dataclass(frozen=True, kw_only=True)
class OutputSettings:
    directory: Path = Path("out")
    timeseries: bool = False
    histogram_bins: int = 101


@dataclass(frozen=True, kw_only=True)
class RunConfig:
    """A validated run configuration; nothing is executed or written while building it."""

    mode: Mode
    source: str
    model: MarketModel
    games: tuple[GameConfig, ...] = ()
    auto_bias: bool = False
    ensemble: EnsembleSettings = field(default_factory=EnsembleSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    alphas: tuple[float, ...] = ()
    alpha_grid: tuple[float, ...] = ()
    critical: CriticalSearch = field(default_factory=CriticalSearch)
    dynamics: DynamicsSettings = field(default_factory=DynamicsSettings)
    compare: CompareSettings = field(default_factory=CompareSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def game(self) -> GameConfig:
        if not self.games:
            raise ValueError(f"mode {self.mode} has no game configuration")
        return self.games[0]

    def seeds_for(self, game: GameConfig) -> tuple[int, ...]:
        return tuple(game.seed + k for k in range(self.ensemble.size))

    def to_record(self) -> dict[str, Any]:
        """Everything that determines the data files; worker count and output location are left out."""
        return {
            "mode": str(self.mode),
            "model": self.model.to_record(),
            "games": [game.to_record() for game in self.games],
            "auto_bias": self.auto_bias,
            "ensemble_size": self.ensemble.size,
            "solver": asdict(self.solver),
            "alphas": list(self.alphas),
            "alpha_grid": list(self.alpha_grid),
            "critical": asdict(self.critical),
            "dynamics": asdict(self.dynamics),
            "compare": {
                "tolerance": self.compare.tolerance,
                "ks_threshold": self.compare.ks_threshold,
                "gbar_errors": self.compare.gbar_errors,
                "solution_file": None if self.compare.solution_file is None else str(self.compare.solution_file),
            },
            "histogram_bins": self.output.histogram_bins,
            "timeseries": self.output.timeseries,
        }

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"), default=float)
        return hashlib.sha256(canonical.encode()).hexdigest()


class _Document:
    """Raw TOML text kept alongside the parsed tables to point diagnostics at source lines."""

    _HEADER = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*(#.*)?$")

    def __init__(self, source: str, text: str) -> None:
        self.source = source
        self._lines = text.splitlines()

    def line_of(self, path: str) -> int | None:
        parts = path.split(".")
        for split in range(len(parts) - 1, -1, -1):
            table, key = ".".join(parts[:split]), parts[split]
            if (line := self._find(table, key)) is not None:
                return line
        return None

    def _find(self, table: str, key: str) -> int | None:
        current = ""
        target = f"{table}.{key}" if table else key
        assignment = re.compile(rf"^\s*{re.escape(key)}\s*=")
        for number, text in enumerate(self._lines, start=1):
            if (header := self._HEADER.match(text)) is not None:
                current = header.group(1).replace(" ", "")
                if current == target:
                    return number
            elif current == table and assignment.match(text):
                return number
        return None

    def error(self, path: str | None, reason: str) -> ConfigError:
        return ConfigError(self.source, path, reason, line=None if path is None else self.line_of(path))


class _Section:
    def __init__(self, document: _Document, path: str, values: dict[str, Any]) -> None:
        self._document = document
        self._path = path
        self._values = dict(values)

    def _field(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def error(self, key: str | None, reason: str) -> ConfigError:
        return self._document.error(self._path if key is None else self._field(key), reason)

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def take(self, key: str, kind: type | tuple[type, ...], default: Any = _MISSING) -> Any:
        if key not in self._values:
            if default is _MISSING:
                raise self.error(key, "is required")
            return default
        value = self._values.pop(key)
        kinds = kind if isinstance(kind, tuple) else (kind,)
        if float in kinds and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, bool) and bool not in kinds:
            raise self.error(key, f"expected {_describe(kinds)}, got a boolean")
        if not isinstance(value, kinds):
            raise self.error(key, f"expected {_describe(kinds)}, got {type(value).__name__}")
        return value

    def take_numbers(self, key: str, kind: type) -> tuple[Any, ...]:
        values = self.take(key, (list, kind))
        items = values if isinstance(values, list) else [values]
        checked = []
        for item in items:
            if isinstance(item, bool) or not isinstance(item, (int, float) if kind is float else kind):
                raise self.error(key, f"expected a list of {kind.__name__} values")
            checked.append(kind(item))
        return tuple(checked)

    def peek(self, key: str) -> Any:
        return self._values.get(key)

    def take_raw(self, key: str) -> dict[str, Any] | None:
        value = self._values.pop(key, None)
        if value is not None and not isinstance(value, dict):
            raise self.error(key, "expected a table")
        return value

    def section(self, key: str) -> "_Section":
        return _Section(self._document, self._field(key), self.take_raw(key) or {})

    def finish(self) -> None:
        for key in self._values:
            raise self.error(key, "unknown setting")


def _describe(kinds: tuple[type, ...]) -> str:
    return " or ".join(kind.__name__ for kind in kinds)


def _parse_document(source: str, text: str) -> dict[str, Any]:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None)
        if line is None and (found := re.search(r"line (\d+)", str(err))) is not None:
            line = int(found.group(1))
        raise ConfigError(source, None, f"invalid TOML: {err}", line=line) from err


def _model(game: _Section, N: int | None) -> MarketModel:
    noise_record = game.take_raw("noise") or {"kind": "none"}
    price_record = game.take_raw("price") or {"kind": "linear"}
    try:
        noise = noise_from_record(noise_record)
    except InvalidNoiseModelError as err:
        raise game.error("noise", err.reason) from err
    # the default operating range covers the largest possible excess demand
    sigma_expected = 1.0 if N is None else max(1.0, np.sqrt(N) / 8.0 + noise.sigma)
    try:
        price = price_from_record(price_record, sigma_expected=sigma_expected)
    except (InvalidPriceFunctionError, TypeError, ValueError) as err:
        raise game.error("price", getattr(err, "reason", str(err))) from err
    return MarketModel(price=price, noise=noise)


def _games(
    mode: Mode,
    game: _Section,
    sweep: _Section,
    model: MarketModel,
    seed: int | None,
) -> tuple[tuple[GameConfig, ...], bool]:
    N = game.take("N", int)
    S = game.take("S", int, 2)
    raw_b = game.take("b", (float, str), 0.0)
    auto_bias = raw_b == "auto"
    if isinstance(raw_b, str) and not auto_bias:
        raise game.error("b", f"expected a number or 'auto', got {raw_b!r}")
    if auto_bias and mode is not Mode.COMPARE:
        raise game.error("b", "'auto' is only meaningful when comparing with the solver")
    b = 0.0 if auto_bias else raw_b
    learning = game.take("learning", bool, True)
    spot_checks = game.take("spot_checks", int, 100)
    warmup = game.take("warmup", int, -1)
    file_seed = game.take("seed", int, 0)
    base_seed = file_seed if seed is None else seed
    total = game.take("T", int, None)
    window_per_P = game.take("window_per_P", float, None)
    if (total is None) == (window_per_P is None):
        raise game.error("T", "give exactly one of T or window_per_P")

    P_values: tuple[int, ...]
    if "P" in game or "alpha" in game:
        if "P" in game and "alpha" in game:
            raise game.error("alpha", "give P or alpha, not both")
        P_values = (game.take("P", int),) if "P" in game else (max(round(game.take("alpha", float) * N), 1),)
    elif mode is Mode.SIMULATE and "P_grid" in sweep:
        P_values = sweep.take_numbers("P_grid", int)
    elif mode is Mode.SIMULATE and "alpha_grid" in sweep:
        P_values = tuple(max(round(alpha * N), 1) for alpha in sweep.take_numbers("alpha_grid", float))
    else:
        raise game.error("P", "is required")
    if mode is not Mode.SIMULATE and len(P_values) != 1:
        raise game.error("P", f"mode {mode} runs a single game")

    games = []
    for P in P_values:
        effective_warmup = warmup if warmup >= 0 else default_warmup(P)
        T = total if total is not None else effective_warmup + round(window_per_P * P)
        try:
            games.append(
                GameConfig(
                    N=N,
                    P=P,
                    T=T,
                    S=S,
                    b=b,
                    price=model.price,
                    noise=model.noise,
                    seed=base_seed,
                    warmup=effective_warmup,
                    learning=learning,
                    spot_checks=spot_checks,
                )
            )
        except InvalidGameConfigError as err:
            raise game.error(err.field, err.reason) from err
    return tuple(games), auto_bias


def _increasing(section: _Section, key: str, values: tuple[float, ...]) -> tuple[float, ...]:
    if not values:
        raise section.error(key, "must not be empty")
    if any(value <= 0 for value in values):
        raise section.error(key, "every alpha must be positive")
    if any(b <= a for a, b in pairwise(values)):
        raise section.error(key, "must be strictly increasing")
    return values


def _solver(section: _Section) -> SolverSettings:
    defaults = SolverSettings()
    try:
        return SolverSettings(
            tolerance=section.take("tolerance", float, defaults.tolerance),
            max_iterations=section.take("max_iterations", int, defaults.max_iterations),
            damping=section.take("damping", float, defaults.damping),
            rsb_margin=section.take("rsb_margin", float, defaults.rsb_margin),
            quadrature_order=section.take("quadrature_order", int, defaults.quadrature_order),
        )
    except ValueError as err:
        raise section.error(None, str(err)) from err


def _positive(section: _Section, key: str, value: int, minimum: int = 1) -> int:
    if value < minimum:
        raise section.error(key, f"must be at least {minimum}, got {value}")
    return value


def load_config(path: Path | str, overrides: CliOverrides | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(str(path), None, f"cannot read configuration: {err.strerror}") from err
    return parse_config(text, source=str(path), overrides=overrides)


def parse_config(text: str, *, source: str = "<config>", overrides: CliOverrides | None = None) -> RunConfig:
    overrides = overrides or CliOverrides()
    document = _Document(source, text)
    root = _Section(document, "", _parse_document(source, text))

    raw_mode = root.take("mode", str, None)
    if raw_mode is None:
        if overrides.mode is None:
            raise root.error("mode", "is required")
        mode = overrides.mode
    else:
        try:
            mode = Mode(raw_mode)
        except ValueError as err:
            choices = ", ".join(str(m) for m in Mode)
            raise root.error("mode", f"unknown mode {raw_mode!r}, expected one of {choices}") from err
        if overrides.mode is not None and overrides.mode is not mode:
            raise root.error("mode", f"file is written for {mode}, not {overrides.mode}")

    game = root.section("game")
    sweep = root.section("sweep")
    solver_section = root.section("solver")
    ensemble_section = root.section("ensemble")
    critical_section = root.section("alpha_c")
    dynamics_section = root.section("dynamics")
    compare_section = root.section("compare")
    output_section = root.section("output")
    root.finish()

    needs_game = mode in (Mode.SIMULATE, Mode.DYNAMICS, Mode.COMPARE)
    N = game.peek("N")
    model = _model(game, N if isinstance(N, int) and not isinstance(N, bool) and N > 0 else None)
    games: tuple[GameConfig, ...] = ()
    auto_bias = False
    if not needs_game:
        game.take("N", int, None)
    else:
        games, auto_bias = _games(mode, game, sweep, model, overrides.seed)
        if mode in (Mode.DYNAMICS, Mode.COMPARE) and games[0].S != 2:
            raise WrongSError(games[0].S)

    solver = _solver(solver_section)
    alphas: tuple[float, ...] = ()
    if mode is Mode.SOLVE:
        alphas = _increasing(solver_section, "alpha", solver_section.take_numbers("alpha", float))
    alpha_grid: tuple[float, ...] = ()
    if mode is Mode.SWEEP:
        alpha_grid = _increasing(sweep, "alpha_grid", sweep.take_numbers("alpha_grid", float))

    size = _positive(ensemble_section, "size", ensemble_section.take("size", int, 1))
    workers = ensemble_section.take("workers", int, 1)
    if overrides.workers is not None:
        workers = overrides.workers
    ensemble = EnsembleSettings(size=size, workers=_positive(ensemble_section, "workers", workers))

    critical = CriticalSearch(
        low=critical_section.take("low", float, 0.05),
        high=critical_section.take("high", float, 1.0),
        tolerance=critical_section.take("tolerance", float, 1e-4),
    )
    if not 0 < critical.low < critical.high:
        raise critical_section.error("low", "need 0 < low < high")

    defaults = DynamicsSettings()
    dynamics = DynamicsSettings(
        agents=_positive(dynamics_section, "agents", dynamics_section.take("agents", int, defaults.agents)),
        dense_until=dynamics_section.take("dense_until", int, defaults.dense_until),
        points_per_decade=dynamics_section.take("points_per_decade", int, defaults.points_per_decade),
        sign_stride=dynamics_section.take("sign_stride", int, None),
        min_ensemble=dynamics_section.take("min_ensemble", int, defaults.min_ensemble),
        decorrelation=dynamics_section.take("decorrelation", bool, False),
        decorrelation_agents=dynamics_section.take("decorrelation_agents", int, defaults.decorrelation_agents),
        decorrelation_pairs=dynamics_section.take("decorrelation_pairs", int, defaults.decorrelation_pairs),
        size_factor=_positive(dynamics_section, "size_factor", dynamics_section.take("size_factor", int, 4), 2),
    )
    if mode is Mode.DYNAMICS and dynamics.agents > games[0].N:
        raise dynamics_section.error("agents", f"cannot track more than N={games[0].N} agents")

    solution_file = compare_section.take("solution_file", str, None)
    compare = CompareSettings(
        tolerance=compare_section.take("tolerance", float, 0.05),
        ks_threshold=compare_section.take("ks_threshold", float, 0.02),
        gbar_errors=compare_section.take("gbar_errors", float, 3.0),
        solution_file=None if solution_file is None else (Path(source).parent / solution_file),
    )

    directory = Path(output_section.take("dir", str, "out"))
    if overrides.out is not None:
        directory = overrides.out
    output = OutputSettings(
        directory=directory,
        timeseries=output_section.take("timeseries", bool, False),
        histogram_bins=_positive(output_section, "histogram_bins", output_section.take("histogram_bins", int, 101), 2),
    )

    for section in (game, sweep, solver_section, ensemble_section, critical_section):
        section.finish()
    for section in (dynamics_section, compare_section, output_section):
        section.finish()

    return RunConfig(
        mode=mode,
        source=source,
        model=model,
        games=games,
        auto_bias=auto_bias,
        ensemble=ensemble,
        solver=solver,
        alphas=alphas,
        alpha_grid=alpha_grid,
        critical=critical,
        dynamics=dynamics,
        compare=compare,
        output=output,
    )
