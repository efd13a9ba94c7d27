from typing import Any, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats


class Distribution(Protocol):
    def cdf(self, x: Any) -> Any: ...


def batch_means(values: ArrayLike, batch_length: int) -> NDArray[np.float64]:
    """Means of consecutive non-overlapping batches; a trailing partial batch is dropped."""
    array = np.asarray(values, dtype=np.float64)
    n_batches = array.size // batch_length
    return array[: n_batches * batch_length].reshape(n_batches, batch_length).mean(axis=1)


def batch_means_error(values: ArrayLike, batch_length: int) -> float:
    """Standard error of the mean of correlated samples from their batch means (NaN with fewer than two batches)."""
    means = batch_means(values, batch_length)
    if means.size < 2:
        return float("nan")
    return float(means.std(ddof=1) / np.sqrt(means.size))


def standard_error_of(batch_estimates: ArrayLike) -> float:
    estimates = np.asarray(batch_estimates, dtype=np.float64)
    if estimates.size < 2:
        return float("nan")
    return float(estimates.std(ddof=1) / np.sqrt(estimates.size))


def excess_kurtosis(values: ArrayLike) -> float:
    return float(stats.kurtosis(np.asarray(values, dtype=np.float64), fisher=True, bias=False))


def ks_distance(values: ArrayLike, distribution: Distribution) -> float:
    return float(stats.kstest(np.asarray(values, dtype=np.float64), distribution.cdf).statistic)


def density_histogram(values: ArrayLike, bins: int = 101) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Bin centres and normalized densities of ``values`` over their own range."""
    density, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, density=True)
    return 0.5 * (edges[:-1] + edges[1:]), density
