"""Penalized HUM: Gramian operator, primal/dual functionals and the CG solve.

For a penalty ``eps > 0`` the control minimising

    F(v) = 1/2 ||v||^2_{L2(omega_T)} + 1/(2 eps) ||(y(T), z(T))||^2

is ``v = 1_omega phi`` where ``(phi, rho)`` solves the adjoint system from
the minimiser ``f`` of the dual functional ``J``, i.e. the solution of

    (Lambda + eps I) f = -(y_bar(T), z_bar(T))

with ``(y_bar, z_bar)`` the uncontrolled trajectory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import (
    GridError,
    HState,
    SpaceTimeGrid,
    control_inner,
    control_l2_norm,
    h_norm,
    inner_product,
    l2_norm,
)
from .solvers import ProblemData, SolverConfig, solve_adjoint, solve_forward, uncontrolled_final

log = logging.getLogger(__name__)


class HumError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class HumConfig:
    epsilon: float
    tol: float = 1e-3
    max_iter: int = 500
    f0: Optional[HState] = None
    recompute_every: int = 25

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(eq=False)
class HumResult:
    control_v: np.ndarray
    minimizer_fT: HState
    final_state: HState
    iterations: int
    residual_history: list
    converged: bool
    trajectory: object = None
    norms: dict = field(default_factory=dict)

    def __repr__(self):
        norms = ", ".join(f"{k}={v:.6g}" for k, v in self.norms.items())
        return f"HumResult(iterations={self.iterations}, converged={self.converged}, {norms})"


def _control_or_zero(v, grid: SpaceTimeGrid) -> np.ndarray:
    return np.zeros((grid.Nt + 1, grid.Nx + 1)) if v is None else v


def _masked_field(traj, data: ProblemData) -> np.ndarray:
    return traj.control_field * data.region.mask


def control_from_final(fT: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig) -> np.ndarray:
    """``1_omega phi`` for the adjoint solution started at ``fT``."""
    return _masked_field(solve_adjoint(fT, data, grid, config), data)


def gramian_apply(fT: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig = SolverConfig()) -> HState:
    """Final state reached from rest under the control ``1_omega phi(fT)``."""
    v = control_from_final(fT, data, grid, config)
    return solve_forward(v, HState.zeros(grid), data, grid, config).final


def evaluate_F(v, y0z0: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig, epsilon: float) -> float:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    v = _control_or_zero(v, grid)
    final = solve_forward(v, y0z0, data, grid, config).final
    vv = control_inner(v, v, data.region, grid)
    return 0.5 * vv + 0.5 / epsilon * inner_product(final, final, data.coupling, grid)


def evaluate_J(fT: HState, y0z0: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig, epsilon: float) -> float:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    traj = solve_adjoint(fT, data, grid, config)
    phi = _masked_field(traj, data)
    cp = data.coupling
    return (
        0.5 * control_inner(phi, phi, data.region, grid)
        + 0.5 * epsilon * inner_product(fT, fT, cp, grid)
        + inner_product(y0z0, traj.initial, cp, grid)
    )


def gradient_J(fT: HState, y0z0: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig, epsilon: float) -> HState:
    """Riesz representer of ``dJ`` in the state inner product: ``eps f + Lambda f + y_bar(T)``."""
    return epsilon * fT + gramian_apply(fT, data, grid, config) + uncontrolled_final(y0z0, data, grid, config)


def duality_residual(v, y0z0: HState, fT: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig = SolverConfig()):
    """``int_{omega_T} v phi - <(y(T), z(T)), fT> + <(y0, z0), (phi(0), rho(0))>``.

    Returns ``(residual, scale)`` where ``scale`` is the sum of the absolute
    values of the three terms.
    """
    v = _control_or_zero(v, grid)
    traj = solve_adjoint(fT, data, grid, config)
    fwd = solve_forward(v, y0z0, data, grid, config)
    cp = data.coupling
    work = control_inner(v, traj.control_field, data.region, grid)
    end = inner_product(fwd.final, fT, cp, grid)
    start = inner_product(y0z0, traj.initial, cp, grid)
    return work - end + start, abs(work) + abs(end) + abs(start)


def observability_ratio(fT: HState, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig = SolverConfig()) -> float:
    """``||(phi(0), rho(0))||^2 / ||phi||^2_{L2(omega_T)}``, a lower bound on the observability constant."""
    traj = solve_adjoint(fT, data, grid, config)
    phi = _masked_field(traj, data)
    den = control_inner(phi, phi, data.region, grid)
    if not den > 1e-300:
        raise HumError("adjoint solution vanishes on omega_T; observability ratio undefined")
    return inner_product(traj.initial, traj.initial, data.coupling, grid) / den


def hum_cg(y0z0: HState, data: ProblemData, grid: SpaceTimeGrid, solver_config: SolverConfig, hum_config: HumConfig) -> HumResult:
    """Conjugate gradient on ``(Lambda + eps I) f = -y_bar(T)`` with periodic residual recomputation.

    All inner products are the weighted state ones.  ``residual_history``
    holds ``||g^k||`` for every iterate, ``g^0`` included.
    """
    eps, tol = hum_config.epsilon, hum_config.tol
    cp = data.coupling

    def dot(a, b):
        return inner_product(a, b, cp, grid)

    def lam(f):
        return gramian_apply(f, data, grid, solver_config)

    f = hum_config.f0 if hum_config.f0 is not None else HState.zeros(grid)
    if f.y.shape != (grid.Nx + 1,):
        raise GridError("initial guess does not conform to the grid")
    y_bar = uncontrolled_final(y0z0, data, grid, solver_config)

    v0 = control_from_final(f, data, grid, solver_config)
    g = eps * f + solve_forward(v0, y0z0, data, grid, solver_config).final
    g0 = np.sqrt(dot(g, g))
    history = [g0]
    iterations, converged = 0, True

    f_norm = np.sqrt(dot(f, f))
    if g0 == 0.0 or (f_norm > 0 and g0 / f_norm <= tol):
        return _finish(f, y0z0, data, grid, solver_config, 0, history, True)

    w = g
    gg = g0 * g0
    while True:
        if iterations >= hum_config.max_iter:
            converged = False
            log.warning("HUM-CG hit max_iter=%d (eps=%g)", hum_config.max_iter, eps)
            break
        g_bar = eps * w + lam(w)
        denom = dot(g_bar, w)
        if not denom > 0:
            raise HumError(f"<g_bar, w> = {denom:.3e} <= 0: operator not positive definite")
        rho = gg / denom
        f = f - rho * w
        g = g - rho * g_bar
        iterations += 1
        if hum_config.recompute_every and iterations % hum_config.recompute_every == 0:
            g_true = eps * f + lam(f) + y_bar
            gap = np.sqrt(dot(g_true - g, g_true - g)) / max(np.sqrt(dot(g_true, g_true)), 1e-300)
            if gap > 1e-8:
                log.debug("residual drift %.2e at iteration %d, replacing", gap, iterations)
                g = g_true
        gg_new = dot(g, g)
        history.append(np.sqrt(gg_new))
        if np.sqrt(gg_new) / g0 <= tol:
            break
        w = g + (gg_new / gg) * w
        gg = gg_new

    return _finish(f, y0z0, data, grid, solver_config, iterations, history, converged)


def _finish(f, y0z0, data, grid, config, iterations, history, converged) -> HumResult:
    v = control_from_final(f, data, grid, config)
    traj = solve_forward(v, y0z0, data, grid, config)
    final = traj.final
    norms = {
        "norm_yT": l2_norm(final.y, grid),
        "abs_zT": abs(final.z),
        "norm_v": control_l2_norm(v, data.region, grid),
    }
    return HumResult(v, f, final, iterations, history, converged, traj, norms)
