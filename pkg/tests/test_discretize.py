import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import CONFIGS, DAY, fd_jacobian, perturbed_states, small_problem
from twophase.config import build_problem, initial_state, load_scenario
from twophase.discretize import (
    POINT,
    VARIABLE,
    NeumannTotalFlux,
    SourceTerm,
    State,
    TwoPhaseProblem,
    assemble_jacobian,
    assemble_residual,
    mass_balance,
    point_permutation,
)
from twophase.grid import build_grid
from twophase.rockfluid import MILLIDARCY, BrooksCoreyCapillary, FluidProps, RockProps, ZeroCapillary


def _flat_problem(n=3, capillary=None, bcs=None, grid=None):
    g = grid or build_grid(n, n, 1, float(n), float(n), 1.0)
    rock = RockProps.uniform(g.num_cells, 0.2, 100 * MILLIDARCY)
    return TwoPhaseProblem(g, rock, FluidProps(), capillary or BrooksCoreyCapillary(1e5, 2.5), bcs=bcs or {})


def test_equilibrium_residual_is_zero():
    prob = _flat_problem()
    st_ = State.uniform(prob.num_cells, 2e5, 0.4)
    assert np.all(assemble_residual(prob, st_, st_, DAY) == 0.0)


def test_two_cell_inflow():
    g = build_grid(2, 1, 1, 2.0, 1.0, 1.0).tag_boundary("in", "xmin")
    q = 1e-5
    prob = _flat_problem(grid=g, bcs={"in": NeumannTotalFlux(q, 1.0)})
    st_ = State.uniform(2, 1e5, 0.5)
    dt = 3600.0
    res = assemble_residual(prob, st_, st_, dt, VARIABLE)
    expected = prob.fluid.rho_w * q * dt / g.cell_volume
    assert -res[0] == pytest.approx(expected, rel=1e-12)
    assert res[1] == 0.0 and res[2] == 0.0 and res[3] == 0.0


@pytest.mark.parametrize("ordering", [VARIABLE, POINT])
def test_jacobian_matches_finite_differences(ordering):
    prob = small_problem()
    new, old = perturbed_states(prob)
    dt = 20 * DAY
    J = assemble_jacobian(prob, new, old, dt, ordering).matrix.toarray()

    def residual(u):
        return assemble_residual(prob, State.from_vector(u, ordering), old, dt, ordering)

    Jfd = fd_jacobian(residual, new.to_vector(ordering))
    err = np.abs(J - Jfd) / (np.abs(J) + 1e-8 * np.abs(J).max())
    assert err.max() <= 1e-5


def test_zero_capillary_saturation_block_is_accumulation():
    prob = _flat_problem(capillary=ZeroCapillary())
    st_ = State.uniform(prob.num_cells, 1e5, 0.3)
    jac = assemble_jacobian(prob, st_, st_, DAY, VARIABLE)
    A_ss = jac.A_ss.toarray()
    phi_rho = prob.rock.porosity * prob.fluid.rho_n
    np.testing.assert_allclose(np.diag(A_ss), phi_rho)
    assert np.count_nonzero(A_ss - np.diag(np.diag(A_ss))) == 0


def test_ordering_round_trip(problem):
    new, old = perturbed_states(problem)
    jv = assemble_jacobian(problem, new, old, DAY, VARIABLE)
    jp = assemble_jacobian(problem, new, old, DAY, POINT)
    assert (jv.reordered(POINT).matrix != jp.matrix).nnz == 0
    assert (jv.reordered(POINT).reordered(VARIABLE).matrix != jv.matrix).nnz == 0
    perm = point_permutation(problem.num_cells)
    np.testing.assert_array_equal(new.to_vector(VARIABLE)[perm], new.to_vector(POINT))


def test_blocks_follow_grid_adjacency(problem):
    new, old = perturbed_states(problem)
    jac = assemble_jacobian(problem, new, old, DAY, POINT)
    adj = problem.grid.adjacency_pattern()
    for block in (jac.A_pp, jac.A_ps, jac.A_sp, jac.A_ss):
        pattern = sp.csr_matrix(block != 0)
        assert (pattern > adj).nnz == 0


def test_pressure_block_symmetric_and_dominant():
    sc = load_scenario(CONFIGS / "gravity_diffusion.cfg")
    prob = build_problem(sc)
    s0 = initial_state(sc)
    jac = assemble_jacobian(prob, s0, s0, sc.dt, VARIABLE)
    A = jac.A_pp.tocsr()
    pattern = sp.csr_matrix(A != 0).astype(int)
    assert (pattern != pattern.T).nnz == 0
    diag = np.abs(A.diagonal())
    off = np.asarray(abs(A).sum(axis=1)).ravel() - diag
    assert np.all(diag >= off * (1 - 1e-12))


def test_source_term_rates():
    g = build_grid(2, 1, 1, 2.0, 1.0, 1.0)
    f = FluidProps()
    src = SourceTerm.from_rates(g, f, [1], 2e-6, 1e-6)
    np.testing.assert_allclose(src.q_w, [0.0, f.rho_w * 2e-6])
    np.testing.assert_allclose(src.q_n, [0.0, f.rho_n * 1e-6])


def test_rejects_bad_inputs(problem):
    new, old = perturbed_states(problem)
    with pytest.raises(ValueError):
        assemble_residual(problem, new, old, 0.0)
    with pytest.raises(ValueError):
        assemble_residual(problem, State.uniform(3, 0, 0), old, DAY)
    bad = new.copy()
    bad.p_w[0] = np.nan
    with pytest.raises(ValueError):
        assemble_residual(problem, bad, old, DAY)


seeds = st.integers(0, 10_000)


@given(seeds)
def test_conservation_telescopes(seed):
    prob = small_problem(seed=seed % 7)
    n = prob.num_cells
    g = prob.grid
    sources = SourceTerm.from_rates(g, prob.fluid, [n - 1], 3e-6, -1e-6)
    prob = TwoPhaseProblem(g, prob.rock, prob.fluid, prob.capillary, prob.relperm, prob.bcs, sources)
    new, old = perturbed_states(prob, seed)
    dt = 5 * DAY
    res = assemble_residual(prob, new, old, dt, VARIABLE)
    water, oil = mass_balance(prob, new, old, dt)
    V = g.cell_volume
    for total, mb in ((V * res[:n].sum(), water), (V * res[n:].sum(), oil)):
        scale = abs(mb.storage_change) + abs(mb.boundary_outflow) + abs(mb.source_mass)
        assert abs(total - mb.imbalance) <= 1e-10 * scale


@given(seeds)
def test_residual_linear_in_dt(seed):
    prob = small_problem(seed=seed % 5)
    new, old = perturbed_states(prob, seed)
    xw_new, xn_new = prob.storage(new)
    xw_old, xn_old = prob.storage(old)
    storage = np.concatenate([xw_new - xw_old, xn_new - xn_old])
    r1 = assemble_residual(prob, new, old, DAY, VARIABLE) - storage
    r2 = assemble_residual(prob, new, old, 2 * DAY, VARIABLE) - storage
    np.testing.assert_allclose(r2, 2 * r1, rtol=1e-9, atol=1e-12 * np.abs(r1).max())


@given(seeds, st.floats(-1e6, 1e6))
def test_pressure_translation_invariance(seed, shift):
    g = build_grid(3, 1, 3, 3.0, 1.0, 3.0).tag_boundary("in", "xmin")
    rng = np.random.default_rng(seed)
    rock = RockProps(np.full(9, 0.25), 100 * MILLIDARCY * np.exp(rng.normal(size=9)))
    prob = TwoPhaseProblem(g, rock, FluidProps(), BrooksCoreyCapillary(1e5, 2.5),
                           bcs={"in": NeumannTotalFlux(1e-6, 1.0)})
    new, old = perturbed_states(prob, seed)
    shifted = State(new.p_w + shift, new.s_n)
    a = assemble_residual(prob, new, old, DAY)
    b = assemble_residual(prob, shifted, old, DAY)
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8 * np.abs(a).max())
