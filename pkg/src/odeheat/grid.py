"""Space-time grids, the weighted state space and its quadratures.

States are pairs ``(y, z)`` with ``y`` sampled at the ``Nx + 1`` nodes of a
uniform mesh of ``[0, L]`` and ``z`` a scalar.  The inner product is

    <(y, a), (p, b)> = int_0^L y p dx + (mu / kappa) a b

with the integral evaluated by the composite trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised for malformed grids, states or control arrays."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    L: float
    T: float
    Nx: int
    Nt: int

    def __post_init__(self):
        if not (self.L > 0 and self.T > 0):
            raise GridError(f"L and T must be positive, got L={self.L}, T={self.T}")
        if self.Nx < 4 or self.Nt < 2:
            raise GridError(f"need Nx >= 4 and Nt >= 2, got Nx={self.Nx}, Nt={self.Nt}")

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.Nx + 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Nt + 1)

    @property
    def space_quadrature(self) -> np.ndarray:
        w = np.full(self.Nx + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    def node_index(self, x: float) -> int:
        """Index of the node sitting at ``x``; raises if ``x`` is off-grid."""
        j = int(round(x / self.dx))
        if not (0 <= j <= self.Nx) or abs(j * self.dx - x) > 1e-9 * self.dx:
            raise GridError(f"x={x} is not a node of the grid (dx={self.dx})")
        return j


@dataclass(frozen=True)
class Coupling:
    mu: float
    kappa: float

    def __post_init__(self):
        if not self.mu * self.kappa > 0:
            raise GridError(
                f"coupling requires mu*kappa > 0 (hypothesis H2), got mu={self.mu}, kappa={self.kappa}"
            )

    @property
    def ratio(self) -> float:
        """Weight ``mu / kappa`` carried by the ODE component."""
        return self.mu / self.kappa


@dataclass(frozen=True, eq=False)
class HState:
    y: np.ndarray
    z: float

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.ndim != 1:
            raise GridError(f"y must be one-dimensional, got shape {y.shape}")
        if not (np.all(np.isfinite(y)) and np.isfinite(self.z)):
            raise GridError("state contains non-finite values")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", float(self.z))

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "HState":
        return cls(np.zeros(grid.Nx + 1), 0.0)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "HState":
        return cls(v[:-1], v[-1])

    def to_vector(self) -> np.ndarray:
        return np.append(self.y, self.z)

    def __add__(self, other: "HState") -> "HState":
        return HState(self.y + other.y, self.z + other.z)

    def __sub__(self, other: "HState") -> "HState":
        return HState(self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "HState":
        return HState(s * self.y, s * self.z)

    __rmul__ = __mul__

    def __neg__(self) -> "HState":
        return HState(-self.y, -self.z)


@dataclass(frozen=True, eq=False)
class ControlRegion:
    """Control set ``omega = (w0, w1)`` resolved on a grid.

    ``mask`` is the 0/1 node indicator of ``[w0, w1]``; ``weights`` is the
    trapezoid rule restricted to the masked run of nodes, so a constant is
    integrated exactly over ``omega`` when its endpoints are nodes.  Node 0
    carries the Dirichlet coupling ``y(0) = mu z`` and is never controlled.
    """

    w0: float
    w1: float
    grid: SpaceTimeGrid
    mask: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.grid
        if not (0 <= self.w0 < self.w1 <= g.L):
            raise GridError(f"need 0 <= w0 < w1 <= L, got ({self.w0}, {self.w1})")
        slack = 1e-9 * g.dx
        x = g.x
        mask = ((x >= self.w0 - slack) & (x <= self.w1 + slack)).astype(float)
        mask[0] = 0.0
        idx = np.flatnonzero(mask)
        if idx.size < 2:
            raise GridError(f"control region ({self.w0}, {self.w1}) covers fewer than 2 nodes")
        weights = mask * g.dx
        weights[idx[0]] = weights[idx[-1]] = 0.5 * g.dx
        mask.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "weights", weights)

    @property
    def nodes(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


def _check_state(a: HState, grid: SpaceTimeGrid):
    if a.y.shape != (grid.Nx + 1,):
        raise GridError(f"state has {a.y.size} nodes, grid expects {grid.Nx + 1}")


def state_weights(coupling: Coupling, grid: SpaceTimeGrid) -> np.ndarray:
    """Diagonal of the inner product on stacked ``(y, z)`` vectors."""
    return np.append(grid.space_quadrature, coupling.ratio)


def inner_product(a: HState, b: HState, coupling: Coupling, grid: SpaceTimeGrid) -> float:
    _check_state(a, grid)
    _check_state(b, grid)
    w = grid.space_quadrature
    return float(np.dot(w * a.y, b.y) + coupling.ratio * a.z * b.z)


def h_norm(a: HState, coupling: Coupling, grid: SpaceTimeGrid) -> float:
    return float(np.sqrt(max(inner_product(a, a, coupling, grid), 0.0)))


def l2_norm(y: np.ndarray, grid: SpaceTimeGrid) -> float:
    """Trapezoid L2(0, L) norm of nodal values."""
    return float(np.sqrt(np.dot(grid.space_quadrature * y, y)))


def _check_control(v: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.Nt + 1, grid.Nx + 1):
        raise GridError(f"control must have shape {(grid.Nt + 1, grid.Nx + 1)}, got {v.shape}")
    return v


def control_inner(u: np.ndarray, v: np.ndarray, region: ControlRegion, grid: SpaceTimeGrid) -> float:
    """L2(omega_T) pairing of two space-time arrays.

    Row ``n`` of a control holds its value on the step ``(t_{n-1}, t_n]``;
    row 0 is never used.  Time integration is therefore exact for the
    piecewise-constant controls the solvers consume.
    """
    u = _check_control(u, grid)
    v = _check_control(v, grid)
    return float(grid.dt * np.sum((u[1:] * v[1:]) @ region.weights))


def control_l2_norm(v: np.ndarray, region: ControlRegion, grid: SpaceTimeGrid) -> float:
    return float(np.sqrt(max(control_inner(v, v, region, grid), 0.0)))


def time_l2_norm(u: np.ndarray, grid: SpaceTimeGrid) -> float:
    """L2(0, T) norm of a level-indexed boundary signal (row 0 unused)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.Nt + 1,):
        raise GridError(f"signal must have {grid.Nt + 1} entries, got {u.shape}")
    return float(np.sqrt(grid.dt * np.dot(u[1:], u[1:])))
