"""Forward and adjoint solvers for the coupled heat/ODE system.

Forward problem on ``(0, L) x (0, T)``::

    y_t - y_xx + a y + b z = 1_omega v
    z' + c z - kappa y_x(0, t) = 0
    y(0, t) = mu z(t),   y_x(L, t) = 0  (or a prescribed flux u(t))

Space is discretised with P1 elements and a lumped (trapezoid) mass, which
is the usual three-point central difference in the interior and the
ghost-node stencil at ``x = L``.  The Dirichlet node is eliminated through
``y_0 = mu z``; its half cell is folded into the ODE row, which turns the
flux ``y_x(0)`` into the second-order balance
``(y_1 - y_0)/dx - dx/2 (y_t + a y + b z)(0)``.  The resulting unknown is
``U = (y_1, ..., y_Nx, z)`` and each theta-step is one bordered tridiagonal
solve.

The discrete adjoint is the exact transpose of the forward step sequence
in the weighted state inner product.  A ``"continuous"`` mode instead
discretises the backward adjoint system directly with finite differences
and a one-sided flux stencil, for comparison.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from .grid import ControlRegion, Coupling, GridError, HState, SpaceTimeGrid

Potential = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class SolverError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Potentials sampled on the grid plus coupling constants and control set.

    ``a`` and ``b`` have shape ``(Nt + 1, Nx + 1)`` (time level, node),
    ``c`` has shape ``(Nt + 1,)``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    coupling: Coupling
    region: ControlRegion

    def __post_init__(self):
        g = self.region.grid
        for name, shape in (("a", (g.Nt + 1, g.Nx + 1)), ("b", (g.Nt + 1, g.Nx + 1)), ("c", (g.Nt + 1,))):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise SolverError(f"potential {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise SolverError(f"potential {name} has non-finite samples")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.region.grid

    @classmethod
    def from_functions(
        cls,
        grid: SpaceTimeGrid,
        a: Potential,
        b: Potential,
        c: Union[float, Callable[[np.ndarray], np.ndarray]],
        coupling: Coupling,
        omega: tuple,
    ) -> "ProblemData":
        """Sample closed-form potentials ``a(x, t)``, ``b(x, t)``, ``c(t)``."""
        X, Tm = np.meshgrid(grid.x, grid.t)

        def sample2(f):
            if callable(f):
                return np.broadcast_to(np.asarray(f(X, Tm), dtype=float), X.shape).copy()
            return np.full(X.shape, float(f))

        cc = np.broadcast_to(np.asarray(c(grid.t), dtype=float), grid.t.shape) if callable(c) else np.full(grid.Nt + 1, float(c))
        return cls(sample2(a), sample2(b), np.array(cc), coupling, ControlRegion(omega[0], omega[1], grid))

    def restrict(self, grid: SpaceTimeGrid, omega: Optional[tuple] = None) -> "ProblemData":
        """Restriction to a leading sub-interval ``[0, grid.L]`` of the same mesh."""
        g = self.grid
        if abs(grid.dx - g.dx) > 1e-12 * g.dx or grid.Nt != g.Nt or grid.T != g.T or grid.Nx > g.Nx:
            raise GridError("restriction grid must share dx, Nt and T and be shorter")
        n = grid.Nx + 1
        region = ControlRegion(*(omega or (0.0, grid.L)), grid)
        return ProblemData(self.a[:, :n], self.b[:, :n], self.c, self.coupling, region)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Time scheme and boundary options.

    ``right_flux`` of ``None`` means homogeneous Neumann at ``x = L``;
    otherwise it holds ``u(t_n)`` for ``n = 0..Nt``.
    """

    theta: float = 1.0
    right_flux: Optional[np.ndarray] = None
    adjoint_mode: str = "discrete"

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise SolverError(f"theta must lie in [0.5, 1], got {self.theta}")
        if self.adjoint_mode not in ("discrete", "continuous"):
            raise SolverError(f"adjoint_mode must be 'discrete' or 'continuous', got {self.adjoint_mode!r}")
        if self.right_flux is not None:
            u = np.array(self.right_flux, dtype=float)
            if u.ndim != 1 or not np.all(np.isfinite(u)):
                raise SolverError("right_flux must be a finite 1-D array")
            u.setflags(write=False)
            object.__setattr__(self, "right_flux", u)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Nodal states at every time level.

    ``y`` has shape ``(Nt + 1, Nx + 1)`` and ``z`` shape ``(Nt + 1,)``.
    Adjoint trajectories also carry ``control_field``: row ``n`` is the
    field paired with a control acting on step ``(t_{n-1}, t_n]``.
    """

    y: np.ndarray
    z: np.ndarray
    grid: SpaceTimeGrid
    control_field: Optional[np.ndarray] = None

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, n: int) -> HState:
        return HState(self.y[n], self.z[n])

    @property
    def states(self) -> list:
        return [self[n] for n in range(len(self))]

    @property
    def initial(self) -> HState:
        return self[0]

    @property
    def final(self) -> HState:
        return self[-1]


class _Stepper:
    """Assembled step operators for one (data, grid, config) triple."""

    def __init__(self, data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig):
        if data.grid != grid:
            raise GridError("problem data was sampled on a different grid")
        self.data, self.grid, self.config = data, grid, config
        th, dt, dx = config.theta, grid.dt, grid.dx
        mu, kap = data.coupling.mu, data.coupling.kappa
        ratio = data.coupling.ratio
        w = grid.space_quadrature
        Nx, Nt = grid.Nx, grid.Nt

        # potentials at t_{n-1+theta} for step n = 1..Nt
        a = th * data.a[1:] + (1 - th) * data.a[:-1]
        b = th * data.b[1:] + (1 - th) * data.b[:-1]
        c = th * data.c[1:] + (1 - th) * data.c[:-1]

        self.mass = np.append(w[1:], ratio + w[0] * mu * mu)

        lo = np.full((Nt, Nx), -1.0 / dx)
        lo[:, 0] = 0.0
        up = np.full((Nt, Nx), -1.0 / dx)
        up[:, -1] = 0.0
        di = np.full((Nt, Nx), 2.0 / dx)
        di[:, -1] = 1.0 / dx
        di += w[1:] * a[:, 1:]
        col = w[1:] * b[:, 1:]
        col[:, 0] -= mu / dx
        row = np.zeros((Nt, Nx))
        row[:, 0] = -mu / dx
        cor = mu * mu / dx + mu * mu * w[0] * a[:, 0] + mu * w[0] * b[:, 0] + ratio * c
        K = (lo, di, up, col, row, cor)
        self.A = self._combine(K, th * dt)
        self.B = self._combine(K, -(1 - th) * dt)

    def _combine(self, K, s):
        lo, di, up, col, row, cor = (s * m for m in K)
        di = di + self.mass[:-1]
        cor = cor + self.mass[-1]
        return tuple(np.ascontiguousarray(m) for m in (lo, di, up, col, row, cor))

    # -- conversions between nodal states and eliminated unknowns

    def project(self, s: HState) -> np.ndarray:
        """Weighted projection of a (possibly incompatible) state onto ``y_0 = mu z``."""
        mu, w0 = self.data.coupling.mu, self.grid.space_quadrature[0]
        z = (w0 * mu * s.y[0] + self.data.coupling.ratio * s.z) / self.mass[-1]
        return np.append(s.y[1:], z)

    def expand(self, U: np.ndarray):
        """Nodal ``(y, z)`` arrays from stacked eliminated unknowns."""
        U = np.atleast_2d(U)
        y = np.empty((U.shape[0], self.grid.Nx + 1))
        y[:, 0] = self.data.coupling.mu * U[:, -1]
        y[:, 1:] = U[:, :-1]
        return y, U[:, -1].copy()

    # -- solves

    def source(self, v: Optional[np.ndarray]) -> np.ndarray:
        g, th = self.grid, self.config.theta
        extra = np.zeros((g.Nt, g.Nx + 1))
        if v is not None:
            extra[:, :-1] = g.dt * v[1:, 1:] * self.data.region.weights[1:]
        u = self.config.right_flux
        if u is not None:
            if u.shape != (g.Nt + 1,):
                raise SolverError(f"right_flux needs {g.Nt + 1} entries, got {u.size}")
            extra[:, -2] += g.dt * (th * u[1:] + (1 - th) * u[:-1])
        return extra

    def forward(self, v: Optional[np.ndarray], s0: HState) -> Trajectory:
        U = _kernels.march(self.A, self.B, self.source(v), self.project(s0))
        y, z = self.expand(U)
        y[0], z[0] = s0.y, s0.z
        return Trajectory(y, z, self.grid)

    def adjoint(self, sT: HState) -> Trajectory:
        if self.config.adjoint_mode == "continuous":
            return self._continuous_adjoint(sT)
        mu, w = self.data.coupling.mu, self.grid.space_quadrature
        vT = np.append(w[1:] * sT.y[1:], w[0] * mu * sT.y[0] + self.data.coupling.ratio * sT.z)
        V, Z = _kernels.march_transposed(self.A, self.B, vT)
        y, z = self.expand(V / self.mass)
        y[-1], z[-1] = sT.y, sT.z
        field, _ = self.expand(Z)
        field[0] = 0.0
        return Trajectory(y, z, self.grid, field)

    def _continuous_adjoint(self, sT: HState) -> Trajectory:
        g, th = self.grid, self.config.theta
        dt, dx = g.dt, g.dx
        mu, kap = self.data.coupling.mu, self.data.coupling.kappa
        w = g.space_quadrature
        Nx, Nt = g.Nx, g.Nt
        d = self.data
        # backward step k goes from level Nt-k to Nt-k-1; implicit level is the lower one
        a = (th * d.a[:-1] + (1 - th) * d.a[1:])[::-1]
        b = (th * d.b[:-1] + (1 - th) * d.b[1:])[::-1]
        c = (th * d.c[:-1] + (1 - th) * d.c[1:])[::-1]
        h2 = 1.0 / (dx * dx)
        lo = np.full((Nt, Nx), -h2)
        lo[:, 0] = 0.0
        lo[:, -1] = -2.0 * h2
        up = np.full((Nt, Nx), -h2)
        up[:, -1] = 0.0
        di = 2.0 * h2 + a[:, 1:]
        col = np.zeros((Nt, Nx))
        col[:, 0] = -mu * h2
        row = (kap / mu) * w[1:] * b[:, 1:]
        row[:, 0] -= 2.0 * kap / dx
        row[:, 1] += 0.5 * kap / dx
        cor = c + 1.5 * kap * mu / dx + kap * w[0] * b[:, 0]
        K = (lo, di, up, col, row, cor)

        def combine(s):
            lo_, di_, up_, col_, row_, cor_ = (s * m for m in K)
            return tuple(np.ascontiguousarray(m) for m in (lo_, di_ + 1.0, up_, col_, row_, cor_ + 1.0))

        A, B = combine(th * dt), combine(-(1 - th) * dt)
        P = _kernels.march(A, B, np.zeros((Nt, Nx + 1)), np.append(sT.y[1:], sT.z))[::-1]
        y, z = self.expand(P)
        y[-1], z[-1] = sT.y, sT.z
        field = np.zeros_like(y)
        field[1:] = th * y[:-1] + (1 - th) * y[1:]
        field[1:, 0] = 0.0
        return Trajectory(y, z, self.grid, field)


@functools.lru_cache(maxsize=16)
def _stepper(data: ProblemData, grid: SpaceTimeGrid, config: SolverConfig) -> _Stepper:
    return _Stepper(data, grid, config)


def _check_state(s: HState, grid: SpaceTimeGrid, what: str):
    if s.y.shape != (grid.Nx + 1,):
        raise GridError(f"{what} has {s.y.size} nodes, grid expects {grid.Nx + 1}")


def solve_forward(
    v: Optional[np.ndarray],
    y0z0: HState,
    data: ProblemData,
    grid: SpaceTimeGrid,
    config: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Theta-scheme solution of the forward system driven by ``1_omega v``.

    ``v`` has shape ``(Nt + 1, Nx + 1)``; row ``n`` acts on step
    ``(t_{n-1}, t_n]`` and row 0 is ignored.  ``None`` means no source.
    """
    _check_state(y0z0, grid, "initial state")
    if v is not None:
        v = np.asarray(v, dtype=float)
        if v.shape != (grid.Nt + 1, grid.Nx + 1):
            raise GridError(f"source must have shape {(grid.Nt + 1, grid.Nx + 1)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise SolverError("source contains non-finite values")
    return _stepper(data, grid, config).forward(v, y0z0)


def solve_adjoint(
    phiT_rhoT: HState,
    data: ProblemData,
    grid: SpaceTimeGrid,
    config: SolverConfig = SolverConfig(),
) -> Trajectory:
    """Backward solution of the adjoint system from final data ``(phi_T, rho_T)``."""
    _check_state(phiT_rhoT, grid, "final state")
    return _stepper(data, grid, config).adjoint(phiT_rhoT)


def uncontrolled_final(
    y0z0: HState,
    data: ProblemData,
    grid: SpaceTimeGrid,
    config: SolverConfig = SolverConfig(),
) -> HState:
    return solve_forward(None, y0z0, data, grid, config).final
