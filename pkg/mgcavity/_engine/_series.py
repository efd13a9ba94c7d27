from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True, kw_only=True, eq=False)
class SignalAccumulators:
    """Per-signal sums over the post-warmup window."""

    count: NDArray[np.int64]
    sum_A: NDArray[np.float64]
    sum_A2: NDArray[np.float64]
    sum_g: NDArray[np.float64]
    sum_g2: NDArray[np.float64]

    @classmethod
    def collect(
        cls,
        mu: NDArray[np.integer],
        A: NDArray[np.float64],
        g: NDArray[np.float64],
        P: int,
    ) -> "SignalAccumulators":
        return cls(
            count=np.bincount(mu, minlength=P).astype(np.int64),
            sum_A=np.bincount(mu, weights=A, minlength=P),
            sum_A2=np.bincount(mu, weights=A * A, minlength=P),
            sum_g=np.bincount(mu, weights=g, minlength=P),
            sum_g2=np.bincount(mu, weights=g * g, minlength=P),
        )


@dataclass(frozen=True, kw_only=True, eq=False)
class TimeSeries:
    """
    Everything recorded by one run.

    Per-step arrays cover all ``T`` steps; steps before ``warmup`` are kept
    but excluded from every stationary average. ``x_counts`` sums the
    preferences x_i^t over the window and ``x_batches`` holds the same sums
    per batch of ``batch_length`` steps (S=2 runs only). ``spot_actions``
    are the full decision vectors at ``spot_steps``.
    """

    N: int
    P: int
    S: int
    warmup: int
    A: NDArray[np.float64]
    g: NDArray[np.float64]
    mu: NDArray[np.int64]
    eta: NDArray[np.float64]
    per_mu: SignalAccumulators
    x_counts: NDArray[np.int64] | None = None
    x_batches: NDArray[np.int64] | None = None
    spot_steps: NDArray[np.int64] | None = None
    spot_actions: NDArray[np.int8] | None = None
    excluded_agent: int | None = None
    ties: int = 0
    seed: int = 0

    @classmethod
    def from_arrays(
        cls,
        *,
        N: int,
        P: int,
        A: NDArray[np.float64],
        g: NDArray[np.float64],
        mu: NDArray[np.int64] | None = None,
        eta: NDArray[np.float64] | None = None,
        warmup: int = 0,
        S: int = 2,
        x_counts: NDArray[np.int64] | None = None,
        x_batches: NDArray[np.int64] | None = None,
    ) -> "TimeSeries":
        A = np.asarray(A, dtype=np.float64)
        mu = np.zeros(A.size, dtype=np.int64) if mu is None else np.asarray(mu, dtype=np.int64)
        eta = np.zeros(A.size, dtype=np.float64) if eta is None else np.asarray(eta, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        window = slice(warmup, A.size)
        return cls(
            N=N,
            P=P,
            S=S,
            warmup=warmup,
            A=A,
            g=g,
            mu=mu,
            eta=eta,
            per_mu=SignalAccumulators.collect(mu[window], A[window], g[window], P),
            x_counts=x_counts,
            x_batches=x_batches,
        )

    @property
    def T(self) -> int:
        return int(self.A.size)

    @property
    def window(self) -> slice:
        return slice(self.warmup, self.T)

    @property
    def window_length(self) -> int:
        return max(self.T - self.warmup, 0)

    @property
    def batch_length(self) -> int:
        return 10 * self.P

    @property
    def n_batches(self) -> int:
        return self.window_length // self.batch_length
