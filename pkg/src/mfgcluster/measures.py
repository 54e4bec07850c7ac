from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .exceptions import (
    EmptyGridError,
    EmptyMeasureError,
    InvalidIntervalError,
    LengthMismatchError,
    NegativeWeightError,
    WeightSumOutOfToleranceError,
)

logger = logging.getLogger(__name__)

RENORMALIZE_TOLERANCE = 1e-9
PAPER_SUPPORT = (-4.995, 4.995)
PAPER_GRID_SIZE = 1000


def _frozen(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmpiricalMeasure:
    """A probability measure made of finitely many weighted atoms on the line.

    Instances are always canonical: positions are sorted ascending, weights
    are permuted along and sum to one, and no atom has zero mass. Use
    `new_empirical` to build one from raw data.

    Parameters
    ----------
    positions :class:`np.ndarray`:
        The atom locations, sorted ascending, read-only

    weights :class:`np.ndarray`:
        The mass of each atom, read-only
    """

    positions: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)

    def __str__(self) -> str:
        return f"EmpiricalMeasure with {len(self)} atoms on [{self.positions[0]}, {self.positions[-1]}]"


def new_empirical(
    positions: Sequence[float], weights: Sequence[float]
) -> EmpiricalMeasure:
    """Builds a canonical empirical measure from raw positions and weights.

    Parameters
    ----------
    positions :class:`Sequence[float]`:
        The atom locations, in any order

    weights :class:`Sequence[float]`:
        The non-negative mass of each atom

    Returns
    -------
    `EmpiricalMeasure`:
        The sorted measure; weights are renormalized when their sum is within
        `RENORMALIZE_TOLERANCE` of one, zero-weight atoms are dropped

    Raises
    ------
    `LengthMismatchError`
        When positions and weights have different lengths

    `NegativeWeightError`
        When any weight is negative

    `WeightSumOutOfToleranceError`
        When the weights are not (nearly) a probability vector

    Example
    -------
    ```py
    m = new_empirical([2.0, -1.0], [0.5, 0.5])
    m.positions  # array([-1., 2.])
    ```
    """
    x = np.asarray(positions, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if len(x) != len(w):
        raise LengthMismatchError(len(x), len(w))
    if len(x) == 0:
        raise EmptyMeasureError()

    negative = np.flatnonzero(w < 0)
    if negative.size:
        raise NegativeWeightError(int(negative[0]), float(w[negative[0]]))

    total = float(w.sum())
    if abs(total - 1.0) > RENORMALIZE_TOLERANCE:
        raise WeightSumOutOfToleranceError(total, RENORMALIZE_TOLERANCE)
    w = w / total

    keep = w > 0
    if not keep.all():
        logger.warning("Dropping %d zero-weight atoms", int((~keep).sum()))
        x, w = x[keep], w[keep]

    order = np.argsort(x, kind="stable")
    return EmpiricalMeasure(_frozen(x[order]), _frozen(w[order]))


def uniform_measure(positions: Sequence[float]) -> EmpiricalMeasure:
    """Shortcut for the measure putting mass 1/n on each of n positions."""
    n = len(positions)
    if n == 0:
        raise EmptyMeasureError()
    return new_empirical(positions, np.full(n, 1.0 / n))


def dirac(position: float) -> EmpiricalMeasure:
    return new_empirical([position], [1.0])


def w1_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure) -> float:
    """Exact Wasserstein-1 distance between two measures on the line.

    Integrates |F1^{-1}(u) - F2^{-1}(u)| over u in [0, 1], where both
    quantile functions are piecewise constant between the merged breakpoints
    of the two cumulative weight sequences.

    Parameters
    ----------
    m1 :class:`EmpiricalMeasure`:
        The first measure

    m2 :class:`EmpiricalMeasure`:
        The second measure

    Returns
    -------
    `float`:
        The non-negative transport cost
    """
    cw1 = np.cumsum(m1.weights)
    cw2 = np.cumsum(m2.weights)
    # both cumulative sequences end at 1 up to rounding
    cw1[-1] = cw2[-1] = 1.0

    qs = np.unique(np.concatenate((cw1, cw2)))
    q1 = m1.positions[np.clip(np.searchsorted(cw1, qs), 0, len(cw1) - 1)]
    q2 = m2.positions[np.clip(np.searchsorted(cw2, qs), 0, len(cw2) - 1)]
    delta = np.diff(qs, prepend=0.0)
    return float(np.sum(delta * np.abs(q1 - q2)))


def translate(m: EmpiricalMeasure, shift: float) -> EmpiricalMeasure:
    return EmpiricalMeasure(_frozen(m.positions + shift), m.weights)


def reflect(m: EmpiricalMeasure, center: float = 0.0) -> EmpiricalMeasure:
    """Mirrors the measure about `center`, keeping it canonical."""
    return EmpiricalMeasure(
        _frozen(2.0 * center - m.positions[::-1]), _frozen(m.weights[::-1])
    )


def mean(m: EmpiricalMeasure) -> float:
    return float(np.dot(m.positions, m.weights))


def spread_to_mean(m: EmpiricalMeasure) -> float:
    """W1 distance from the measure to the Dirac mass at its own mean.

    Used as the width of a population: a smaller value means a narrower
    distribution.
    """
    return w1_distance(m, dirac(mean(m)))


def is_symmetric(m: EmpiricalMeasure, center: float, tol: float = 1e-12) -> bool:
    mirrored = reflect(m, center)
    return bool(
        np.allclose(mirrored.positions, m.positions, rtol=0.0, atol=tol)
        and np.allclose(mirrored.weights, m.weights, rtol=0.0, atol=tol)
    )


def grid(n: int, interval: tuple[float, float]) -> np.ndarray:
    """Gets `n` evenly spaced points on `interval`, endpoints included.

    The points are mirrored about the interval midpoint exactly, so grids
    over symmetric intervals are exactly symmetric. A single point sits at
    the midpoint.

    Raises
    ------
    `EmptyGridError`
        When `n` is zero

    `InvalidIntervalError`
        When the interval is empty or reversed
    """
    if n < 1:
        raise EmptyGridError()
    a, b = interval
    if not a < b:
        raise InvalidIntervalError(a, b)
    mid = 0.5 * (a + b)
    points = np.linspace(a, b, n)
    return mid + 0.5 * (points - points[::-1])


class DistributionTag(str, enum.Enum):
    UNIFORM = "uniform"
    SEMI_CIRCLE = "semicircle"
    TRIANGULAR = "triangular"
    INVERTED_SEMI_CIRCLE = "inverted_semicircle"


@dataclass(frozen=True)
class DistributionKind:
    """One of the four reference initial populations.

    Parameters
    ----------
    tag :class:`DistributionTag`:
        The shape of the density

    support :class:`tuple[float, float]`:
        The closed interval the grid is laid on
    """

    tag: DistributionTag
    support: tuple[float, float] = field(default=PAPER_SUPPORT)

    def __post_init__(self) -> None:
        a, b = self.support
        if not a < b:
            raise InvalidIntervalError(a, b)

    @classmethod
    def from_name(
        cls, name: str, support: tuple[float, float] = PAPER_SUPPORT
    ) -> DistributionKind:
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"semi_circle": "semicircle", "inverted_semi_circle": "inverted_semicircle"}
        return cls(DistributionTag(aliases.get(key, key)), support)

    def density(self, points: np.ndarray) -> np.ndarray:
        a, b = self.support
        half_width = 0.5 * (b - a)
        rel = np.clip(np.abs(points - 0.5 * (a + b)) / half_width, 0.0, 1.0)
        if self.tag is DistributionTag.UNIFORM:
            return np.ones_like(rel)
        if self.tag is DistributionTag.SEMI_CIRCLE:
            return np.sqrt(1.0 - rel * rel)
        if self.tag is DistributionTag.TRIANGULAR:
            return 1.0 - rel
        # quarter circles bending inward, peaked at the centre
        edge = 1.0 - rel
        return 1.0 - np.sqrt(1.0 - edge * edge)


def initial_distribution(kind: DistributionKind, n: int) -> EmpiricalMeasure:
    """Lays `n` grid points on the kind's support and weights them by its
    density.

    Atoms where the density vanishes (the endpoints of the triangle and of the
    inverted semi-circle) carry no mass and are dropped.
    """
    points = grid(n, kind.support)
    dens = kind.density(points)
    total = dens.sum()
    if total <= 0:
        raise EmptyMeasureError()
    return new_empirical(points, dens / total)


def write_measure(filepath: str, m: EmpiricalMeasure) -> None:
    """Writes a measure as a `position,weight` CSV with 17 significant digits."""
    frame = pd.DataFrame({"position": m.positions, "weight": m.weights})
    frame.to_csv(filepath, index=False, float_format="%.17g")


def read_measure(filepath: str) -> EmpiricalMeasure:
    """Reads a `position,weight` CSV written by `write_measure`. A file with
    only a `position` column is read as a uniform measure."""
    frame = pd.read_csv(filepath, float_precision="round_trip")
    positions = frame["position"].to_numpy(dtype=np.float64)
    if "weight" in frame.columns:
        return new_empirical(positions, frame["weight"].to_numpy(dtype=np.float64))
    return uniform_measure(positions)
