"""Shared problem builders for the test suite."""

from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from twophase.discretize import Dirichlet, NeumannTotalFlux, State, TwoPhaseProblem
from twophase.grid import build_grid
from twophase.rockfluid import MILLIDARCY, BrooksCoreyCapillary, FluidProps, LinearCapillary, RockProps

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DAY = 86400.0
CONFIGS = Path(__file__).resolve().parents[1] / "src" / "twophase" / "configs"


def poisson2d(n):
    """5-point Laplacian on an n x n grid (Dirichlet, unscaled)."""
    T = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n))
    I = sp.identity(n)
    return sp.csr_matrix(sp.kron(I, T) + sp.kron(T, I))


def small_problem(nx=4, nz=4, capillary=None, seed=0, gravity="z", rate=1e-4):
    """Heterogeneous vertical slice with an inflow face and a pressure outlet."""
    rng = np.random.default_rng(seed)
    g = build_grid(nx, 1, nz, float(nx), 1.0, float(nz), gravity)
    g = g.tag_boundary("in", "xmin").tag_boundary("out", "xmax")
    n = g.num_cells
    rock = RockProps(np.full(n, 0.2), 100 * MILLIDARCY * np.exp(rng.normal(size=(n, 3))))
    cap = capillary or BrooksCoreyCapillary(1e6, 2.5)
    return TwoPhaseProblem(g, rock, FluidProps(), cap,
                           bcs={"in": NeumannTotalFlux(rate, 1.0), "out": Dirichlet(0.0, 0.2)})


def perturbed_states(problem, seed=1):
    rng = np.random.default_rng(seed)
    n = problem.num_cells
    old = State(1e5 + 1e3 * rng.normal(size=n), 0.8 - 0.3 * rng.random(n))
    new = State(old.p_w + 1e4 * rng.normal(size=n), old.s_n - 0.1 * rng.random(n))
    return new, old


def fd_jacobian(residual, u, rel_step=1e-6):
    cols = []
    for k in range(len(u)):
        h = rel_step * (1.0 + abs(u[k]))
        up, um = u.copy(), u.copy()
        up[k] += h
        um[k] -= h
        cols.append((residual(up) - residual(um)) / (2 * h))
    return np.column_stack(cols)


@pytest.fixture
def problem():
    return small_problem()


@pytest.fixture
def linear_problem():
    return small_problem(capillary=LinearCapillary(1e5))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
