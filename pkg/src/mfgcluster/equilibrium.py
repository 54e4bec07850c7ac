from __future__ import annotations

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field, replace
from typing import ContextManager, Literal, Optional, Sequence

import numpy as np

from ._kernels import window_sums
from .coupling import Coupling, t_star
from .exceptions import InvalidGameConfigError, NonConvergenceError
from .measures import EmpiricalMeasure

logger = logging.getLogger(__name__)

DEFAULT_SAFETY = 0.99
AUTO_FRACTION = 0.9
NEWTON_TOL_FLOOR = 1e-14

InnerTolerance = Literal["budget", "tight"]


def alpha_for(t: float, lambda1: float, lipschitz_L1: float) -> float:
    """The contraction factor t L1 / (1 - t lambda1) of the equilibrium map."""
    return t * lipschitz_L1 / (1.0 - t * lambda1)


@dataclass(frozen=True)
class GameConfig:
    """Parameters of one round of the game and of its solvers.

    Use `GameConfig.for_coupling` to build a validated instance; the coupling
    constants it is built from are kept so that sub-games with a different
    horizon can be derived with `with_horizon`.

    Parameters
    ----------
    t :class:`float`:
        The horizon of a round

    lambda1, lipschitz_L1 :class:`float`:
        The constants of the coupling the configuration was validated for

    newton_tol :class:`float`:
        Residual tolerance of single best responses, also the floor of the
        per-component tolerance inside the Picard loop

    picard_tol :class:`float`:
        Target for the certified distance to the fixed point

    inner_tolerance :class:`Literal['budget', 'tight']`:
        `budget` solves sweep k only to the error alpha^k, `tight` solves every
        sweep down to `newton_tol`

    workers :class:`int`:
        Number of threads sharing a sweep; results do not depend on it
    """

    t: float
    lambda1: float
    lipschitz_L1: float
    sup_phi_prime: float
    newton_tol: float = 1e-14
    picard_tol: float = 1e-10
    max_newton_iters: int = 100
    max_picard_iters: int = 10_000
    inner_tolerance: InnerTolerance = "budget"
    workers: int = 1
    alpha: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.t > 0:
            raise InvalidGameConfigError(f"t must be positive, got {self.t}")
        if self.t * self.lambda1 >= 1.0:
            raise InvalidGameConfigError(f"t = {self.t} is at or beyond 1 / lambda1")
        object.__setattr__(self, "alpha", alpha_for(self.t, self.lambda1, self.lipschitz_L1))
        if not 0.0 < self.alpha < 1.0:
            raise InvalidGameConfigError(f"contraction factor {self.alpha} is not in (0, 1)")
        if self.newton_tol <= 0 or self.picard_tol <= 0:
            raise InvalidGameConfigError("tolerances must be positive")
        if self.max_newton_iters < 1 or self.max_picard_iters < 1:
            raise InvalidGameConfigError("iteration budgets must be positive")
        if self.inner_tolerance not in ("budget", "tight"):
            raise InvalidGameConfigError(f"unknown inner tolerance '{self.inner_tolerance}'")
        if self.workers < 1:
            raise InvalidGameConfigError("workers must be at least 1")

    @classmethod
    def for_coupling(
        cls,
        c: Coupling,
        t: Optional[float] = None,
        safety: float = DEFAULT_SAFETY,
        **kwargs,
    ) -> GameConfig:
        """Builds a configuration for `c`, with `t = 0.9 t*` when no horizon
        is given.

        Raises
        ------
        `InvalidGameConfigError`
            When `t` exceeds t*(c, safety)
        """
        limit = t_star(c, safety)
        if t is None:
            t = AUTO_FRACTION * limit
        elif t > limit:
            raise InvalidGameConfigError(f"t = {t} exceeds t* = {limit}")
        return cls(t, c.lambda1, c.lipschitz_L1, c.sup_phi_prime, **kwargs)

    def with_horizon(self, t: float) -> GameConfig:
        return replace(self, t=t)

    @property
    def damping(self) -> float:
        """Lower bound 1 - t lambda1 of the derivative of the best-response
        equation."""
        return 1.0 - self.t * self.lambda1


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of `tilde_E`.

    Parameters
    ----------
    positions :class:`np.ndarray`:
        The fixed point z of tilde_F, aligned with the input positions

    picard_iters :class:`int`:
        Number of sweeps performed

    certified_error :class:`float`:
        The inexact-Picard error estimate at the final sweep

    residual :class:`float`:
        max_j |z_j + t D_y G(z_j, mu_z) - x_j|

    a_posteriori_error :class:`float`:
        (eps + alpha |z_k - z_{k-1}|) / (1 - alpha), eps the achieved inexactness
    """

    positions: np.ndarray
    picard_iters: int
    certified_error: float
    residual: float
    a_posteriori_error: float


def contraction_factor(cfg: GameConfig) -> float:
    return alpha_for(cfg.t, cfg.lambda1, cfg.lipschitz_L1)


def error_bound(k: int, alpha: float, first_step_norm: float) -> float:
    """Distance bound between the k-th inexact Picard iterate and the fixed
    point when sweep j was solved to within alpha^j.

    Example
    -------
    ```py
    error_bound(0, 0.5, 1.0)  # 10.0
    ```
    """
    one_minus = 1.0 - alpha
    return alpha**k * (
        2.0 * (k - alpha * k + 1) / one_minus**2 + first_step_norm / one_minus
    )


def picard_error_bound(k: int, alpha: float, first_step_norm: float) -> float:
    """The exact-iteration estimate alpha^k / (1 - alpha) |F(x) - x|."""
    return alpha**k / (1.0 - alpha) * first_step_norm


def _sorted_measure(z: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.all(z[:-1] <= z[1:]):
        return z, weights
    order = np.argsort(z, kind="stable")
    return z[order], weights[order]


def _newton(
    x: np.ndarray,
    z: np.ndarray,
    weights: np.ndarray,
    cfg: GameConfig,
    c: Coupling,
    tol: float,
    offset: int = 0,
    start: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solves y + t D_y G(y, mu_z) = x componentwise by safeguarded Newton.

    Every component keeps its own bracket [x - t sup|phi'|, x + t sup|phi'|]
    and is frozen once its residual drops below `tol`, so a component's
    result does not depend on the other components of the batch. Newton
    starts from `start` clipped into the bracket, or from x.
    """
    t, r = cfg.t, c.support_radius
    half_width = t * c.sup_phi_prime
    lo = x - half_width
    hi = x + half_width
    y = x.copy() if start is None else np.clip(start, lo, hi)
    residual = np.zeros_like(x)
    active = np.arange(len(x))

    for _ in range(cfg.max_newton_iters):
        ya, xa = y[active], x[active]
        f = ya + t * window_sums(c.phi_prime, ya, z, weights, r) - xa
        width = hi[active] - lo[active]
        done = (np.abs(f) <= tol) | (width <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(ya)))
        residual[active] = np.abs(f)
        keep = ~done
        active, ya, f = active[keep], ya[keep], f[keep]
        if active.size == 0:
            return y, residual

        lo[active] = np.where(f < 0, ya, lo[active])
        hi[active] = np.where(f > 0, ya, hi[active])
        slope = 1.0 + t * window_sums(c.phi_second, ya, z, weights, r)
        step = ya - f / slope
        outside = (step <= lo[active]) | (step >= hi[active])
        y[active] = np.where(outside, 0.5 * (lo[active] + hi[active]), step)

    raise NonConvergenceError("newton", cfg.max_newton_iters, index=int(active[0]) + offset)


def worker_pool(cfg: GameConfig, pool: Optional[Executor] = None) -> ContextManager[Optional[Executor]]:
    """A thread pool for `cfg.workers` threads, or `pool` itself when one is
    passed in or a single worker is configured. Only a pool created here is
    shut down on exit."""
    if pool is not None or cfg.workers == 1:
        return nullcontext(pool)
    return ThreadPoolExecutor(max_workers=cfg.workers)


def _sweep(
    x: np.ndarray,
    z: np.ndarray,
    weights: np.ndarray,
    cfg: GameConfig,
    c: Coupling,
    tol: float,
    pool: Optional[Executor] = None,
) -> tuple[np.ndarray, np.ndarray]:
    # Newton for agent j starts from z_j, the previous iterate
    zs, ws = _sorted_measure(z, weights)
    if cfg.workers == 1 or len(x) < 2 * cfg.workers:
        return _newton(x, zs, ws, cfg, c, tol, start=z)

    bounds = np.linspace(0, len(x), cfg.workers + 1).astype(int)
    chunks = list(zip(bounds[:-1], bounds[1:]))

    def solve(b: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = b
        return _newton(x[lo:hi], zs, ws, cfg, c, tol, offset=lo, start=z[lo:hi])

    with worker_pool(cfg, pool) as executor:
        parts = list(executor.map(solve, chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def best_response(x: float, m: EmpiricalMeasure, cfg: GameConfig, c: Coupling) -> float:
    """The unique minimizer y of |x - y|^2 / (2t) + G(y, m).

    Raises
    ------
    `NonConvergenceError`
        When Newton does not reach `cfg.newton_tol` within `cfg.max_newton_iters`
    """
    y, _ = _newton(np.array([float(x)]), m.positions, m.weights, cfg, c, cfg.newton_tol)
    return float(y[0])


def tilde_F(
    z: Sequence[float],
    x: Sequence[float],
    weights: Sequence[float],
    cfg: GameConfig,
    c: Coupling,
    tol: Optional[float] = None,
) -> np.ndarray:
    """Best responses of every initial position x_j against the measure with
    atoms `z` and masses `weights`."""
    z, x, w = (np.asarray(a, dtype=np.float64) for a in (z, x, weights))
    y, _ = _sweep(x, z, w, cfg, c, cfg.newton_tol if tol is None else tol)
    return y


def fixed_point_residual(
    z: np.ndarray, x: np.ndarray, weights: np.ndarray, cfg: GameConfig, c: Coupling
) -> float:
    """max_j |z_j + t D_y G(z_j, mu_z) - x_j|."""
    zs, ws = _sorted_measure(z, weights)
    grad = window_sums(c.phi_prime, z, zs, ws, c.support_radius)
    return float(np.max(np.abs(z + cfg.t * grad - x)))


def tilde_E(
    x: Sequence[float],
    weights: Sequence[float],
    cfg: GameConfig,
    c: Coupling,
    *,
    start: Optional[Sequence[float]] = None,
    pool: Optional[Executor] = None,
) -> EquilibriumResult:
    """Computes the equilibrium of one round by inexact Picard iteration
    z_{k+1} ~ tilde_F(z_k) started at z_0 = x, or at `start` when given.

    All distances are taken in the maximum norm, in which tilde_F contracts
    with factor alpha for any weights. The sweep producing iterate k is
    solved to within alpha^k (`budget`) or to the Newton floor (`tight`).
    Iteration stops once the inexact-Picard estimate or the a-posteriori
    estimate is below `cfg.picard_tol` and the fixed-point residual is too.
    Both estimates hold for any starting point, so a guess closer to the
    fixed point only saves sweeps.

    Parameters
    ----------
    x :class:`Sequence[float]`:
        The initial positions

    weights :class:`Sequence[float]`:
        The mass of each initial position

    start :class:`Optional[Sequence[float]]`:
        A guess of the fixed point, aligned with `x`

    pool :class:`Optional[Executor]`:
        A thread pool to share the sweeps on when `cfg.workers > 1`; one is
        created for the call otherwise

    Returns
    -------
    `EquilibriumResult`:
        The certified fixed point

    Raises
    ------
    `NonConvergenceError`
        When `cfg.max_picard_iters` sweeps do not certify the tolerance
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    alpha = cfg.alpha

    z = x.copy() if start is None else np.array(start, dtype=np.float64)
    if z.shape != x.shape:
        raise ValueError(f"start has shape {z.shape}, expected {x.shape}")
    first_step = 0.0
    with worker_pool(cfg, pool) as executor:
        for k in range(cfg.max_picard_iters):
            if cfg.inner_tolerance == "budget":
                tol = max(cfg.newton_tol, alpha ** (k + 1) * cfg.damping)
            else:
                tol = cfg.newton_tol
            z_next, newton_residual = _sweep(x, z, w, cfg, c, tol, executor)

            step = float(np.max(np.abs(z_next - z)))
            if k == 0:
                first_step = step
            inexactness = float(np.max(newton_residual)) / cfg.damping
            certified = error_bound(k + 1, alpha, first_step)
            a_posteriori = (inexactness + alpha * step) / (1.0 - alpha)
            z = z_next
            logger.debug(
                "Picard sweep %d: step=%.3e certified=%.3e a_posteriori=%.3e",
                k + 1, step, certified, a_posteriori,
            )

            if min(certified, a_posteriori) <= cfg.picard_tol:
                residual = fixed_point_residual(z, x, w, cfg, c)
                if residual <= cfg.picard_tol:
                    return EquilibriumResult(z, k + 1, certified, residual, a_posteriori)

    raise NonConvergenceError("picard", cfg.max_picard_iters)


def realized_cost(
    x: np.ndarray, y: np.ndarray, weights: np.ndarray, cfg: GameConfig, c: Coupling
) -> np.ndarray:
    """J_t(x_j, y_j, mu_y) = |y_j - x_j|^2 / (2t) + G(y_j, mu_y) for every agent."""
    ys, ws = _sorted_measure(y, weights)
    congregation = window_sums(c.phi, y, ys, ws, c.support_radius)
    return (y - x) ** 2 / (2.0 * cfg.t) + congregation
