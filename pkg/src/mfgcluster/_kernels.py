from typing import Callable

import numpy as np

Kernel = Callable[[np.ndarray], np.ndarray]


def window_bounds(
    queries: np.ndarray, positions: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """Gets, for each query, the index range of sorted `positions` lying
    strictly within `radius` of it."""
    lo = np.searchsorted(positions, queries - radius, side="right")
    hi = np.searchsorted(positions, queries + radius, side="left")
    return lo, np.maximum(hi, lo)


def window_sums(
    kernel: Kernel,
    queries: np.ndarray,
    positions: np.ndarray,
    weights: np.ndarray,
    radius: float,
) -> np.ndarray:
    """Evaluates sum_k weights[k] * kernel(queries[i] - positions[k]) for every
    query, visiting only the atoms inside the kernel support.

    Parameters
    ----------
    kernel :class:`Callable`:
        A vectorized kernel vanishing at distances >= `radius`

    queries :class:`np.ndarray`:
        The points to evaluate at, any order

    positions :class:`np.ndarray`:
        The atom locations, sorted ascending

    weights :class:`np.ndarray`:
        The atom masses, aligned with `positions`

    radius :class:`float`:
        The support radius of the kernel

    Returns
    -------
    `np.ndarray`:
        One sum per query. Each sum is accumulated sequentially in atom order,
        so the value for a query does not depend on which other queries are
        evaluated in the same call.
    """
    queries = np.atleast_1d(np.asarray(queries, dtype=np.float64))
    lo, hi = window_bounds(queries, positions, radius)
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.zeros(len(queries))

    owner = np.repeat(np.arange(len(queries)), counts)
    starts = np.cumsum(counts) - counts
    atom = np.arange(total) - np.repeat(starts, counts) + np.repeat(lo, counts)
    values = weights[atom] * kernel(queries[owner] - positions[atom])
    return np.bincount(owner, weights=values, minlength=len(queries))


def pair_matrix(kernel: Kernel, points: np.ndarray) -> np.ndarray:
    """Dense matrix K[j, k] = kernel(points[j] - points[k])."""
    return kernel(points[:, None] - points[None, :])
