import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from mgcavity._engine._config import GameConfig
from mgcavity._engine._strategies import StrategyTable
from mgcavity.errors import OutOfRangeError

logger = logging.getLogger(__name__)

INITIAL_SCORE_SCALE = 1e-10


@dataclass(kw_only=True)
class GameState:
    scores: NDArray[np.float64]
    best: NDArray[np.intp]
    t: int = 0
    ties: int = 0

    def reselect(self) -> None:
        """Recomputes every agent's best strategy; exact ties go to the lowest index and are counted."""
        if self.scores.shape[1] == 2:
            gap = self.scores[:, 0] - self.scores[:, 1]
            self.best = (gap < 0).astype(np.intp)
            tied = int(np.count_nonzero(gap == 0))
        else:
            self.best = np.argmax(self.scores, axis=1)
            top = np.take_along_axis(self.scores, self.best[:, None], axis=1)
            tied = int(np.count_nonzero(self.scores == top)) - self.scores.shape[0]
        if tied:
            self.ties += tied
            logger.warning("Broke %d exact score ties at step %d", tied, self.t)

    @property
    def preferences(self) -> NDArray[np.int8]:
        """x_i^t = sign(U_up - U_down) for two-strategy agents."""
        return (1 - 2 * self.best).astype(np.int8)

    @property
    def score_gap(self) -> NDArray[np.float64]:
        """U_i^t = U_up - U_down for two-strategy agents."""
        return self.scores[:, 0] - self.scores[:, 1]


@dataclass(frozen=True, kw_only=True, eq=False)
class StepOutcome:
    A: float
    g: float
    decisions: NDArray[np.int8]


def init_scores(cfg: GameConfig, rng: np.random.Generator) -> GameState:
    scores = rng.normal(0.0, INITIAL_SCORE_SCALE, size=(cfg.N, cfg.S))
    state = GameState(scores=scores, best=np.zeros(cfg.N, dtype=np.intp))
    state.reselect()
    return state


def step(
    state: GameState,
    table: StrategyTable,
    cfg: GameConfig,
    mu: int,
    eta: float,
    *,
    excluded_agent: int | None = None,
) -> StepOutcome:
    """
    Plays one round: agents act on their current best strategies, the market
    clears at g(A + eta), then every strategy of every agent is scored in hindsight.
    """
    decisions = table.actions(mu, state.best)
    total = int(decisions.sum(dtype=np.int64))
    if excluded_agent is not None:
        total -= int(decisions[excluded_agent])
    A = total / np.sqrt(cfg.N)
    x = A + eta
    low, high = cfg.price.operating_range
    if not low <= x <= high:
        raise OutOfRangeError(x, (low, high), t=state.t + 1, A=A, eta=eta)
    g_t = float(cfg.price.evaluate(x))
    state.scores -= table.columns[mu] * g_t
    state.t += 1
    state.reselect()
    return StepOutcome(A=A, g=g_t, decisions=decisions)
