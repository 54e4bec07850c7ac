from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._kernels import Kernel, window_sums
from .exceptions import (
    InvalidCouplingError,
    InvalidGameConfigError,
    UnknownCouplingError,
)
from .measures import EmpiricalMeasure

logger = logging.getLogger(__name__)

SCAN_POINTS = 200_001
SAFETY_MARGIN = 1e-6

# below this value of 1 - s^2 the bump and its derivatives underflow to zero
_BUMP_CUTOFF = 1.0 / 700.0


@dataclass(frozen=True)
class Coupling:
    """A convolution coupling G(y, m) = sum_k w_k phi(y - z_k).

    The kernel must be even, non-positive, minimal at zero and vanish with
    its first two derivatives outside (-r, r). The game constants are derived
    from a dense scan of `phi_second` by `make_coupling`.

    Parameters
    ----------
    name :class:`str`:
        The registry name of the kernel

    phi, phi_prime, phi_second :class:`Callable[[np.ndarray], np.ndarray]`:
        The vectorized kernel and its first two derivatives

    support_radius :class:`float`:
        r, the kernel vanishes for |x| >= r

    lambda1 :class:`float`:
        Semiconvexity constant, phi'' + lambda1 >= 0

    lipschitz_L1 :class:`float`:
        W1-Lipschitz constant of the gradient of G, sup |phi''|

    sup_phi_prime :class:`float`:
        Bound on |phi'|, hence on |D_y G|
    """

    name: str
    phi: Kernel
    phi_prime: Kernel
    phi_second: Kernel
    support_radius: float
    lambda1: float
    lipschitz_L1: float
    sup_phi_prime: float

    def __str__(self) -> str:
        return (
            f"Coupling '{self.name}' (r={self.support_radius}, lambda1={self.lambda1:.6g},"
            f" L1={self.lipschitz_L1:.6g})"
        )

    @property
    def phi_second_at_zero(self) -> float:
        return float(self.phi_second(np.zeros(1))[0])


def make_coupling(
    name: str,
    phi: Kernel,
    phi_prime: Kernel,
    phi_second: Kernel,
    radius: float,
    *,
    scan_points: int = SCAN_POINTS,
    validate: bool = True,
) -> Coupling:
    """Builds a coupling from a kernel and its derivatives, scanning the
    constants lambda1, L1 and sup|phi'| on a dense grid of the support.

    Parameters
    ----------
    name :class:`str`:
        The name of the kernel

    phi, phi_prime, phi_second :class:`Callable`:
        Vectorized kernel and derivatives

    radius :class:`float`:
        The support radius

    scan_points :class:`int`:
        Number of grid points of the constant scan

    validate :class:`bool`:
        Whether to check evenness, sign and support on the scan grid

    Raises
    ------
    `InvalidCouplingError`
        When the kernel violates one of the required invariants
    """
    if radius <= 0:
        raise InvalidCouplingError(name, f"support radius must be positive, got {radius}")

    xs = np.linspace(-radius, radius, scan_points)
    second = phi_second(xs)
    lambda1 = max(0.0, -float(second.min())) * (1 + SAFETY_MARGIN)
    lipschitz = float(np.abs(second).max()) * (1 + SAFETY_MARGIN)
    sup_prime = float(np.abs(phi_prime(xs)).max()) * (1 + SAFETY_MARGIN)

    if validate:
        _validate_kernel(name, phi, phi_prime, phi_second, radius, xs)
    if lipschitz <= 0:
        raise InvalidCouplingError(name, "phi'' vanishes identically")

    logger.debug(
        "Scanned '%s': lambda1=%.12g L1=%.12g sup|phi'|=%.12g",
        name, lambda1, lipschitz, sup_prime,
    )
    return Coupling(name, phi, phi_prime, phi_second, radius, lambda1, lipschitz, sup_prime)


def _validate_kernel(
    name: str,
    phi: Kernel,
    phi_prime: Kernel,
    phi_second: Kernel,
    radius: float,
    xs: np.ndarray,
) -> None:
    values = phi(xs)
    if np.max(np.abs(values - phi(-xs))) > 1e-12:
        raise InvalidCouplingError(name, "phi is not even")
    if values.max() > 0:
        raise InvalidCouplingError(name, "phi takes positive values")
    zero = np.zeros(1)
    if phi(zero)[0] > values.min() + 1e-12:
        raise InvalidCouplingError(name, "phi is not minimal at 0")
    if abs(phi_prime(zero)[0]) > 1e-12:
        raise InvalidCouplingError(name, "phi'(0) is not zero")

    outside = radius * np.array([-3.0, -1.5, -1.0, 1.0, 1.5, 3.0])
    for f in (phi, phi_prime, phi_second):
        if np.any(f(outside) != 0):
            raise InvalidCouplingError(name, "kernel does not vanish outside its support")


def bump_coupling(amplitude: float = 1.0, radius: float = 1.0) -> Coupling:
    """The smooth bump kernel -phi(x) = A exp(-1 / (1 - (x/r)^2)) on (-r, r).

    With the defaults A = 1, r = 1 this is the reference congregation kernel,
    phi(0) = -1/e and phi''(0) = 2/e.
    """
    if amplitude <= 0:
        raise InvalidCouplingError("bump", f"amplitude must be positive, got {amplitude}")

    def _parts(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.asarray(x, dtype=np.float64) / radius
        u = 1.0 - s * s
        inside = u > _BUMP_CUTOFF
        safe_u = np.where(inside, u, 1.0)
        f = np.where(inside, np.exp(-1.0 / safe_u), 0.0)
        return s, safe_u, f

    def phi(x: np.ndarray) -> np.ndarray:
        _, _, f = _parts(x)
        return -amplitude * f

    def phi_prime(x: np.ndarray) -> np.ndarray:
        s, u, f = _parts(x)
        return (amplitude / radius) * f * 2.0 * s / (u * u)

    def phi_second(x: np.ndarray) -> np.ndarray:
        s, u, f = _parts(x)
        s2 = s * s
        bracket = 4.0 * s2 / u**4 - 2.0 / u**2 - 8.0 * s2 / u**3
        return -(amplitude / radius**2) * f * bracket

    name = "bump" if (amplitude, radius) == (1.0, 1.0) else f"bump(A={amplitude:g}, r={radius:g})"
    return make_coupling(name, phi, phi_prime, phi_second, radius)


_REGISTRY: dict[str, Callable[[], Coupling]] = {}
_CACHE: dict[str, Coupling] = {}


def register_coupling(name: str) -> Callable[[Callable[[], Coupling]], Callable[[], Coupling]]:
    """Decorator registering a zero-argument coupling factory under `name`.

    Example
    -------
    ```py
    @register_coupling("wide_bump")
    def _wide_bump() -> Coupling:
        return bump_coupling(radius=2.0)
    ```
    """

    def decorator(factory: Callable[[], Coupling]) -> Callable[[], Coupling]:
        _REGISTRY[name] = factory
        _CACHE.pop(name, None)
        return factory

    return decorator


def get_coupling(name: str) -> Coupling:
    """Gets a registered coupling by name, building it once.

    Raises
    ------
    `UnknownCouplingError`
        When no coupling is registered under `name`
    """
    if name not in _REGISTRY:
        raise UnknownCouplingError(name)
    if name not in _CACHE:
        _CACHE[name] = _REGISTRY[name]()
    return _CACHE[name]


def available_couplings() -> list[str]:
    return sorted(_REGISTRY)


@register_coupling("bump")
def _bump() -> Coupling:
    return bump_coupling()


@register_coupling("unit_bump")
def _unit_bump() -> Coupling:
    # scaled so that phi''(0) = 1
    return bump_coupling(amplitude=math.e / 2.0)


def g_value(y: float, m: EmpiricalMeasure, c: Coupling) -> float:
    """G(y, m) = sum_k w_k phi(y - z_k), summing only atoms within r of y."""
    return float(window_sums(c.phi, np.array([y]), m.positions, m.weights, c.support_radius)[0])


def g_grad(y: float, m: EmpiricalMeasure, c: Coupling) -> float:
    """D_y G(y, m) = sum_k w_k phi'(y - z_k)."""
    return float(
        window_sums(c.phi_prime, np.array([y]), m.positions, m.weights, c.support_radius)[0]
    )


def g_hess(y: float, m: EmpiricalMeasure, c: Coupling) -> float:
    """D^2_yy G(y, m) = sum_k w_k phi''(y - z_k)."""
    return float(
        window_sums(c.phi_second, np.array([y]), m.positions, m.weights, c.support_radius)[0]
    )


def t_star(c: Coupling, safety: float) -> float:
    """The largest admissible horizon, `safety / (lambda1 + L1)`.

    Raises
    ------
    `InvalidGameConfigError`
        When `safety` is not in the open interval (0, 1)
    """
    if not 0.0 < safety < 1.0:
        raise InvalidGameConfigError(f"safety must lie in (0, 1), got {safety}")
    return safety / (c.lambda1 + c.lipschitz_L1)
