from typing import Optional, Sequence

import numpy as np

from .coupling import Coupling


def fixed_point_from_sizes(
    sizes: Sequence[int], gaps: Sequence[float], start: float = 0.0
) -> np.ndarray:
    """Builds sorted positions made of coincident groups.

    Parameters
    ----------
    sizes :class:`Sequence[int]`:
        Number of agents in each group, left to right

    gaps :class:`Sequence[float]`:
        Distance between consecutive groups, one fewer than `sizes`

    start :class:`float`:
        Position of the leftmost group

    Example
    -------
    ```py
    fixed_point_from_sizes([3, 2], [1.5])  # array([0., 0., 0., 1.5, 1.5])
    ```
    """
    if len(gaps) != len(sizes) - 1:
        raise ValueError(f"Expected {len(sizes) - 1} gaps, got {len(gaps)}")
    centers = start + np.concatenate(([0.0], np.cumsum(gaps)))
    return np.repeat(centers, sizes).astype(np.float64)


def random_fixed_point(
    rng: np.random.Generator,
    c: Coupling,
    n_clusters: tuple[int, int] = (2, 6),
    cluster_size: tuple[int, int] = (1, 20),
    gap_range: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, list[int]]:
    """Draws a configuration of coincident groups pairwise more than r apart.

    Bounds are inclusive; gaps default to [r + 0.01, 3r].

    Returns
    -------
    `tuple[np.ndarray, list[int]]`:
        The sorted positions and the group sizes
    """
    r = c.support_radius
    low, high = gap_range or (r + 0.01, 3.0 * r)
    k = int(rng.integers(n_clusters[0], n_clusters[1] + 1))
    sizes = [int(s) for s in rng.integers(cluster_size[0], cluster_size[1] + 1, size=k)]
    gaps = rng.uniform(low, high, size=k - 1)
    start = float(rng.uniform(-1.0, 1.0))
    return fixed_point_from_sizes(sizes, gaps, start), sizes


def perturb(x: np.ndarray, rng: np.random.Generator, magnitude: float) -> np.ndarray:
    """Moves `x` by a random direction of Euclidean norm `magnitude`."""
    direction = rng.standard_normal(len(x))
    return x + magnitude * direction / np.linalg.norm(direction)
