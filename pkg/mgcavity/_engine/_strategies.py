from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from mgcavity._engine._config import GameConfig
from mgcavity.errors import WrongSError

DRAW_CHUNK = 256


@dataclass(frozen=True, kw_only=True, eq=False)
class StrategyTable:
    """
    Quenched strategies of every agent.

    Entries are held signal-major, ``columns[mu]`` being the contiguous N×S
    block a step reads. :py:attr:`entries` is the agent-major N×S×P view.
    """

    columns: NDArray[np.int8]
    _agents: NDArray[np.intp] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_agents", np.arange(self.columns.shape[1]))
        self.columns.setflags(write=False)

    @classmethod
    def from_entries(cls, entries: NDArray[np.integer]) -> "StrategyTable":
        """Builds a table from an N×S×P array of ±1 entries."""
        array = np.asarray(entries)
        if array.ndim != 3 or not np.all(np.abs(array) == 1):
            raise ValueError("entries must be an N×S×P array of ±1 values")
        return cls(columns=np.ascontiguousarray(np.transpose(array, (2, 0, 1)), dtype=np.int8))

    @property
    def N(self) -> int:
        return self.columns.shape[1]

    @property
    def S(self) -> int:
        return self.columns.shape[2]

    @property
    def P(self) -> int:
        return self.columns.shape[0]

    @property
    def entries(self) -> NDArray[np.int8]:
        return np.transpose(self.columns, (1, 2, 0))

    def actions(self, mu: int, best: NDArray[np.intp]) -> NDArray[np.int8]:
        return self.columns[mu][self._agents, best]

    def _require_two(self) -> None:
        if self.S != 2:
            raise WrongSError(self.S)

    @cached_property
    def omega(self) -> NDArray[np.int8]:
        """ω_i^μ, the half-sum of an agent's two strategies (N×P)."""
        self._require_two()
        up, down = self.columns[:, :, 0].astype(np.int16), self.columns[:, :, 1].astype(np.int16)
        return ((up + down) // 2).T.astype(np.int8)

    @cached_property
    def xi(self) -> NDArray[np.int8]:
        """ξ_i^μ, the half-difference of an agent's two strategies (N×P)."""
        self._require_two()
        up, down = self.columns[:, :, 0].astype(np.int16), self.columns[:, :, 1].astype(np.int16)
        return ((up - down) // 2).T.astype(np.int8)


def draw_strategies(cfg: GameConfig, rng: np.random.Generator) -> StrategyTable:
    columns = np.empty((cfg.P, cfg.N, cfg.S), dtype=np.int8)
    p_plus = cfg.plus_probability
    for start in range(0, cfg.P, DRAW_CHUNK):
        stop = min(start + DRAW_CHUNK, cfg.P)
        draws = rng.random((stop - start, cfg.N, cfg.S)) < p_plus
        columns[start:stop] = np.where(draws, 1, -1)
    return StrategyTable(columns=columns)
