import numpy as np
import pytest

from odeheat import ControlRegion, Coupling, HState, ProblemData, SpaceTimeGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_problem(rng, Nx=8, Nt=16, mu=1.3, kappa=0.7, omega=(0.25, 0.75), T=0.5):
    grid = SpaceTimeGrid(1.0, T, Nx, Nt)
    data = ProblemData(
        rng.normal(size=(Nt + 1, Nx + 1)),
        rng.normal(size=(Nt + 1, Nx + 1)),
        rng.normal(size=Nt + 1),
        Coupling(mu, kappa),
        ControlRegion(*omega, grid),
    )
    return grid, data


def random_state(rng, grid):
    return HState(rng.normal(size=grid.Nx + 1), rng.normal())


def problem_one(Nx=30, Nt=120, b=0.0):
    grid = SpaceTimeGrid(1.0, 0.6, Nx, Nt)
    data = ProblemData.from_functions(grid, 1.0, b, 1.0, Coupling(1.0, 1.0), (0.3, 0.7))
    return grid, data


def state_one(grid):
    return HState(-10 * np.sin(np.pi * grid.x), 0.0)


def dense_gramian(data, grid, config=None):
    """Column-by-column assembly of the Gramian on stacked ``(y, z)`` vectors."""
    from odeheat.hum import gramian_apply
    from odeheat.solvers import SolverConfig

    config = config or SolverConfig()
    n = grid.Nx + 2
    cols = [gramian_apply(HState.from_vector(e), data, grid, config).to_vector() for e in np.eye(n)]
    return np.array(cols).T


def dense_minimizer(y0z0, data, grid, epsilon, config=None):
    from odeheat.solvers import SolverConfig, uncontrolled_final

    config = config or SolverConfig()
    lam = dense_gramian(data, grid, config)
    rhs = -uncontrolled_final(y0z0, data, grid, config).to_vector()
    return HState.from_vector(np.linalg.solve(lam + epsilon * np.eye(lam.shape[0]), rhs))
