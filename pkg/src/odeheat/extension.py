"""Boundary control through domain extension.

The boundary problem on ``(0, ell)`` with flux control ``y_x(ell, t) = u(t)``
is solved by extending the initial data to ``(0, L)``, computing a
distributed HUM control supported in ``omega`` inside ``(ell, L)``, and reading
off ``u = y_x(ell, .)`` from the controlled trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, HState, SpaceTimeGrid, l2_norm, time_l2_norm
from .hum import HumConfig, HumResult, hum_cg
from .solvers import ProblemData, SolverConfig, Trajectory, solve_forward


@dataclass(frozen=True)
class ExtensionConfig:
    """Geometry of the extended problem.

    ``grid`` lives on ``(0, L)``; ``ell`` must be one of its interior nodes
    and ``omega`` must lie in ``(ell, L)``.
    """

    ell: float
    grid: SpaceTimeGrid
    omega: tuple = (1.3, 1.7)

    def __post_init__(self):
        g = self.grid
        if not 0 < self.ell < g.L:
            raise GridError(f"need 0 < ell < L, got ell={self.ell}, L={g.L}")
        j = g.node_index(self.ell)
        if not 0 < j < g.Nx:
            raise GridError("ell must be an interior node of the extended grid")
        w0, w1 = self.omega
        if not self.ell < w0 < w1 <= g.L:
            raise GridError(f"omega={self.omega} must lie inside (ell, L) = ({self.ell}, {g.L})")

    @property
    def ell_index(self) -> int:
        return self.grid.node_index(self.ell)

    @property
    def sub_grid(self) -> SpaceTimeGrid:
        return SpaceTimeGrid(self.ell, self.grid.T, self.ell_index, self.grid.Nt)


@dataclass(frozen=True, eq=False)
class BoundaryControl:
    u: np.ndarray
    grid: SpaceTimeGrid

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.grid.Nt + 1,) or not np.all(np.isfinite(u)):
            raise GridError("boundary control must be finite with Nt + 1 entries")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


def extend_initial(y0: np.ndarray, ext: ExtensionConfig) -> np.ndarray:
    """Continue ``y0`` from ``[0, ell]`` to ``[0, L]`` by its value at ``ell``."""
    j = ext.ell_index
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (j + 1,):
        raise GridError(f"y0 has {y0.size} nodes, the (0, ell) sub-grid has {j + 1}")
    out = np.empty(ext.grid.Nx + 1)
    out[: j + 1] = y0
    out[j + 1 :] = y0[-1]
    return out


def extract_trace_control(traj: Trajectory, ext: ExtensionConfig) -> BoundaryControl:
    """Centred difference ``(y_{j+1} - y_{j-1}) / (2 dx)`` at the node ``x_j = ell``."""
    j = ext.ell_index
    if traj.y.shape[1] != ext.grid.Nx + 1:
        raise GridError("trajectory does not live on the extended grid")
    u = (traj.y[:, j + 1] - traj.y[:, j - 1]) / (2.0 * ext.grid.dx)
    return BoundaryControl(u, ext.sub_grid)


def verify_boundary_control(
    u: BoundaryControl,
    y0z0: HState,
    data: ProblemData,
    grid: SpaceTimeGrid,
    config: SolverConfig = SolverConfig(),
    compat_tol: float = 1e-10,
) -> dict:
    """Re-solve the flux-controlled problem on ``(0, ell)`` and report final norms."""
    mu = data.coupling.mu
    if abs(y0z0.y[0] - mu * y0z0.z) > compat_tol * max(1.0, abs(y0z0.z)):
        raise GridError(f"initial data violate y0(0) = mu z0 (y0(0)={y0z0.y[0]}, mu z0={mu * y0z0.z})")
    cfg = SolverConfig(config.theta, u.u, config.adjoint_mode)
    traj = solve_forward(None, y0z0, data, grid, cfg)
    return {
        "norm_yT": l2_norm(traj.final.y, grid),
        "abs_zT": abs(traj.final.z),
        "norm_u": time_l2_norm(u.u, grid),
        "trajectory": traj,
    }


def boundary_hum(
    y0: np.ndarray,
    z0: float,
    data: ProblemData,
    ext: ExtensionConfig,
    solver_config: SolverConfig,
    hum_config: HumConfig,
):
    """Extended-domain HUM followed by trace extraction and re-solve on ``(0, ell)``.

    ``data`` lives on ``ext.grid``.  Returns ``(hum_result, control, check)``.
    """
    s0 = HState(extend_initial(y0, ext), z0)
    result: HumResult = hum_cg(s0, data, ext.grid, solver_config, hum_config)
    control = extract_trace_control(result.trajectory, ext)
    sub = ext.sub_grid
    check = verify_boundary_control(control, HState(y0, z0), data.restrict(sub), sub, solver_config)
    return result, control, check
