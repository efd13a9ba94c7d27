import logging
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats
from scipy.optimize import brentq
from scipy.special import erfinv

from mgcavity._cavity._fields import EffectiveNoise, ghat, ghat_prime
from mgcavity._cavity._quadrature import DEFAULT_ORDER, QuadratureGrid
from mgcavity._cavity._reactions import (
    clipped_second_moment,
    preference_moment,
    reaction_Rg,
    signal_field_variance,
    solve_bias,
    update_order_params,
)
from mgcavity._market import MarketModel
from mgcavity.errors import MinorityGameError, NotConvergedError, ReplicaSymmetryBrokenError

logger = logging.getLogger(__name__)

SMALLEST_PRICE_FIELD = 1e-14
LARGEST_PRICE_REACTION = 1e15


@dataclass(frozen=True, kw_only=True)
class SolverSettings:
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    damping: float = 0.5
    rsb_margin: float = 1e-3
    quadrature_order: int = DEFAULT_ORDER

    def __post_init__(self) -> None:
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise ValueError("tolerance must be positive and max_iterations at least one")


@dataclass(frozen=True, kw_only=True)
class CavitySolution:
    alpha: float
    q_x: float
    q_g: float
    q_A: float
    R_x: float
    R_g: float
    b: float
    phi: float
    sigma: float
    sigma_eta2: float
    price_root: float
    converged: bool
    iterations: int
    residual: float

    @property
    def margin(self) -> float:
        """alpha - (1 - phi), positive in the replica-symmetric phase."""
        return self.alpha - (1.0 - self.phi)

    @property
    def self_impact(self) -> float:
        """Per-step error an agent makes by ignoring its own market impact in hindsight scores."""
        return self.R_x / np.sqrt(self.alpha)

    @property
    def sigma2_parts(self) -> tuple[float, float, float]:
        return (self.sigma_eta2, (1.0 - self.q_x) / 2.0, self.q_A)

    def to_record(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "sigma": self.sigma,
            "q_x": self.q_x,
            "q_g": self.q_g,
            "q_A": self.q_A,
            "R_x": self.R_x,
            "R_g": self.R_g,
            "b": self.b,
            "phi": self.phi,
            "sigma_eta2": self.sigma_eta2,
            "price_root": self.price_root,
            "self_impact": self.self_impact,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "CavitySolution":
        fields = set(cls.__dataclass_fields__)
        return cls(**{key: value for key, value in record.items() if key in fields})


@dataclass(frozen=True, kw_only=True)
class SweepRow:
    alpha: float
    solution: CavitySolution | None
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.solution is not None and self.solution.converged

    def to_record(self) -> dict[str, Any]:
        columns = ("sigma", "q_x", "q_g", "q_A", "R_x", "R_g", "b", "phi")
        if self.solution is None:
            return {"alpha": self.alpha, **dict.fromkeys(columns, float("nan")), "converged": False}
        record = self.solution.to_record()
        return {"alpha": self.alpha, **{key: record[key] for key in columns}, "converged": self.converged}


@dataclass(frozen=True, kw_only=True)
class _ClosedField:
    q_g: float
    R_x: float
    R_g: float
    phi: float
    u: float | None = None

    @property
    def collapsed(self) -> bool:
        return self.u is not None

    def next_preference_moment(self, alpha: float) -> float:
        if self.u is not None:
            return clipped_second_moment(self.u)
        return preference_moment(self.R_x, self.q_g, alpha)


class _FieldClosure:
    """
    Closes the price field at fixed (q_x, b): finds q_g = E[ĝ(z_g)^2] where,
    for each trial q_g, the reaction pair solves R_g = (1 - phi(R_x)) / (2 R_x)
    with R_x = -(alpha/2) E[ĝ'(z_g)].
    """

    def __init__(self, alpha: float, q_x: float, b: float, model: MarketModel, grid: QuadratureGrid) -> None:
        self._alpha = alpha
        self._model = model
        self._grid = grid
        self._noise = EffectiveNoise.combine(model.noise, q_x, grid)
        self._z = grid.points(b, signal_field_variance(q_x))
        self._R_g_guess = -0.1

    def agent_reaction(self, R_g: float) -> float:
        slopes = ghat_prime(self._z, R_g, self._model.price, self._noise)
        return -0.5 * self._alpha * float(self._grid.weights @ slopes)

    def reactions(self, q_g: float) -> tuple[float, float, float]:
        def mismatch(R_g: float) -> float:
            return R_g - reaction_Rg(self.agent_reaction(R_g), q_g, self._alpha)[0]

        guess = self._R_g_guess
        low, high = 0.5 * guess, 0.0
        if mismatch(low) > 0:
            high, low = low, 2.0 * guess
            while mismatch(low) > 0:
                high, low = low, 4.0 * low
                if low < -LARGEST_PRICE_REACTION:
                    raise ReplicaSymmetryBrokenError(self._alpha, 0.0)
        R_g = float(brentq(mismatch, low, high, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        self._R_g_guess = R_g
        R_x = self.agent_reaction(R_g)
        R_g, phi = reaction_Rg(R_x, q_g, self._alpha)
        return R_x, R_g, phi

    def growth(self, log_q_g: float) -> float:
        """log of E[ĝ^2] over the trial q_g; decreasing, with a root at the closed field."""
        q_g = float(np.exp(log_q_g))
        _, R_g, _ = self.reactions(q_g)
        prices = np.asarray(ghat(self._z, R_g, self._model.price, self._noise))
        return float(np.log(self._grid.weights @ prices**2) - log_q_g)

    def close(self, q_g_guess: float, R_g_guess: float) -> _ClosedField:
        self._R_g_guess = min(R_g_guess, -1e-6)
        floor = np.log(SMALLEST_PRICE_FIELD)
        center = float(np.log(max(q_g_guess, SMALLEST_PRICE_FIELD)))
        low, high = center - 0.5, center + 0.5
        while self.growth(high) > 0:
            low, high = high, high + 2.0
        while self.growth(low) < 0:
            if low <= floor:
                return self._collapsed()
            high, low = low, max(low - 2.0, floor)
        log_q_g = float(brentq(self.growth, low, high, xtol=1e-13, rtol=4 * np.finfo(float).eps))
        q_g = float(np.exp(log_q_g))
        R_x, R_g, phi = self.reactions(q_g)
        return _ClosedField(q_g=q_g, R_x=R_x, R_g=R_g, phi=phi)

    def _collapsed(self) -> _ClosedField:
        """
        Limit of a vanishing price field: the reactions diverge while the
        unfrozen fraction tends to alpha, which fixes the agent-field ratio u.
        """
        if self._alpha >= 1.0:
            raise ReplicaSymmetryBrokenError(self._alpha, 0.0)
        u = float(np.sqrt(2.0) * erfinv(self._alpha))
        return _ClosedField(q_g=0.0, R_x=0.0, R_g=-np.inf, phi=1.0 - self._alpha, u=u)


def solve_self_consistent(
    alpha: float,
    model: MarketModel,
    *,
    settings: SolverSettings | None = None,
    initial: CavitySolution | None = None,
) -> CavitySolution:
    """
    Stationary state of the replica-symmetric phase at ``alpha``.

    The outer loop is a damped fixed point on (q_x, b); the price field q_g
    and the reaction pair (R_x, R_g) are closed exactly at each step.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    settings = settings or SolverSettings()
    grid = QuadratureGrid(settings.quadrature_order)
    price_root = model.price.root()
    if initial is not None:
        q_x, q_g, b, R_g = initial.q_x, initial.q_g, initial.b, initial.R_g
    else:
        q_x, q_g, b, R_g = 0.5, 0.1, price_root, -0.1

    residual = float("inf")
    for iteration in range(1, settings.max_iterations + 1):
        field = _FieldClosure(alpha, q_x, b, model, grid).close(q_g, R_g)
        q_x_next = field.next_preference_moment(alpha)
        if field.collapsed:
            # no price feedback left to fix the bias; keep it and let q_x move
            b_next = b
            residual = abs(q_x_next - q_x)
            logger.debug("alpha=%g iteration %d: collapsed price field, q_x=%.12g", alpha, iteration, q_x_next)
        else:
            b_next = solve_bias(field.R_g, q_x, model, grid, start=b)
            residual = max(abs(q_x_next - q_x), abs(b_next - b), abs(field.q_g - q_g) / max(q_g, SMALLEST_PRICE_FIELD))
            logger.debug(
                "alpha=%g iteration %d: q_x=%.12g q_g=%.6g b=%.8g R_g=%.8g residual=%.2e",
                alpha,
                iteration,
                q_x_next,
                field.q_g,
                b_next,
                field.R_g,
                residual,
            )
            q_g, R_g = field.q_g, field.R_g
        q_x += settings.damping * (q_x_next - q_x)
        b = b_next
        if residual < settings.tolerance:
            break
    else:
        raise NotConvergedError(alpha, settings.max_iterations, residual)

    field = _FieldClosure(alpha, q_x, b, model, grid).close(q_g, R_g)
    margin = 0.0 if field.collapsed else alpha - (1.0 - field.phi)
    if margin < settings.rsb_margin:
        raise ReplicaSymmetryBrokenError(alpha, margin)
    order = update_order_params(field.R_x, field.R_g, b, q_x, field.q_g, alpha, model, grid)
    sigma_eta2 = model.noise.variance()
    solution = CavitySolution(
        alpha=alpha,
        q_x=q_x,
        q_g=field.q_g,
        q_A=order.q_A,
        R_x=field.R_x,
        R_g=field.R_g,
        b=b,
        phi=field.phi,
        sigma=float(np.sqrt(sigma_eta2 + (1.0 - q_x) / 2.0 + order.q_A)),
        sigma_eta2=sigma_eta2,
        price_root=price_root,
        converged=True,
        iterations=iteration,
        residual=residual,
    )
    logger.info(
        "Solved alpha=%g in %d iterations: sigma=%.6f phi=%.6f b=%.6g",
        alpha,
        iteration,
        solution.sigma,
        solution.phi,
        solution.b,
    )
    return solution


def naive_mean_field(alpha: float, model: MarketModel, *, settings: SolverSettings | None = None) -> CavitySolution:
    """
    Stationary state when both reaction terms are ignored: every agent
    freezes on one strategy, so q_x = phi = 1.
    """
    settings = settings or SolverSettings()
    grid = QuadratureGrid(settings.quadrature_order)
    b = solve_bias(0.0, 1.0, model, grid, start=model.price.root())
    noise = EffectiveNoise.combine(model.noise, 1.0, grid)
    z = grid.points(b, signal_field_variance(1.0))
    prices = np.asarray(ghat(z, 0.0, model.price, noise))
    sigma_eta2 = model.noise.variance()
    q_A = float(grid.weights @ (z - b) ** 2)
    return CavitySolution(
        alpha=alpha,
        q_x=1.0,
        q_g=float(grid.weights @ prices**2),
        q_A=q_A,
        R_x=0.0,
        R_g=0.0,
        b=b,
        phi=1.0,
        sigma=float(np.sqrt(sigma_eta2 + q_A)),
        sigma_eta2=sigma_eta2,
        price_root=model.price.root(),
        converged=True,
        iterations=0,
        residual=0.0,
    )


def near_transition_reactions(
    alpha: float,
    phi: float,
    b: float,
    q_x: float,
    model: MarketModel,
    grid: QuadratureGrid | None = None,
) -> tuple[float, float]:
    """Leading-order (R_x, R_g) close to the transition, where alpha - (1 - phi) is small."""
    grid = grid or QuadratureGrid()
    noise = EffectiveNoise.combine(model.noise, q_x, grid)
    mean_slope = float(noise.mean_of(model.price.derivative, np.asarray(b)))
    gap = 1.0 - phi - alpha
    return 0.5 * gap * mean_slope, alpha / gap / mean_slope


@dataclass(frozen=True, kw_only=True)
class CriticalPoint:
    """``probes`` lists every (alpha, margin) tried, with margin None where no symmetric solution exists."""

    alpha_c: float
    phi: float
    probes: list[tuple[float, float | None]]


def find_alpha_c(
    model: MarketModel,
    *,
    low: float = 0.05,
    high: float = 1.0,
    tolerance: float = 1e-4,
    settings: SolverSettings | None = None,
) -> CriticalPoint:
    """
    Bisects on alpha for the point where the replica-symmetric margin
    alpha - (1 - phi) vanishes. Probes that fail to converge or break
    replica symmetry count as below the transition.
    """
    base = settings or SolverSettings()
    probe_settings = SolverSettings(
        tolerance=base.tolerance,
        max_iterations=base.max_iterations,
        damping=base.damping,
        rsb_margin=1e-9,
        quadrature_order=base.quadrature_order,
    )
    probes: list[tuple[float, float | None]] = []

    def probe(alpha: float, initial: CavitySolution | None) -> CavitySolution | None:
        try:
            solution = solve_self_consistent(alpha, model, settings=probe_settings, initial=initial)
        except (NotConvergedError, ReplicaSymmetryBrokenError) as err:
            logger.debug("alpha=%g is below the transition (%s)", alpha, err.code)
            probes.append((alpha, None))
            return None
        probes.append((alpha, solution.margin))
        return solution

    above = probe(high, None)
    if above is None:
        raise ReplicaSymmetryBrokenError(high, float("nan"))
    if probe(low, None) is not None:
        raise ValueError(f"alpha={low} is already above the transition")
    while high - low > tolerance:
        middle = 0.5 * (low + high)
        found = probe(middle, above)
        if found is None:
            low = middle
        else:
            high, above = middle, found
    alpha_c = 0.5 * (low + high)
    logger.info("Located the transition at alpha_c=%.5f (phi=%.5f)", alpha_c, above.phi)
    return CriticalPoint(alpha_c=alpha_c, phi=above.phi, probes=probes)


def sweep(
    alpha_grid: Iterable[float],
    model: MarketModel,
    *,
    settings: SolverSettings | None = None,
) -> list[SweepRow]:
    """Continuation-seeded solutions along ``alpha_grid``; failures are kept as flagged rows."""
    rows: list[SweepRow] = []
    previous: CavitySolution | None = None
    for alpha in alpha_grid:
        try:
            previous = solve_self_consistent(alpha, model, settings=settings, initial=previous)
            rows.append(SweepRow(alpha=alpha, solution=previous))
        except MinorityGameError as err:
            logger.warning("No solution at alpha=%g: %s", alpha, err.message)
            rows.append(SweepRow(alpha=alpha, solution=None, error=err.code))
            previous = None
    return rows


def predict_A_distribution(sol: CavitySolution) -> Any:
    """Predicted stationary distribution of A + eta: a Gaussian centred on b with the predicted volatility."""
    if not sol.converged:
        raise ValueError("cannot predict from an unconverged solution")
    return stats.norm(loc=sol.b, scale=sol.sigma)
