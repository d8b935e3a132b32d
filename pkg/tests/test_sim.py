import numpy as np
import pytest

from conftest import CONFIGS, DAY, small_problem
from twophase.bench import simulate
from twophase.config import build_problem, initial_state, load_scenario
from twophase.discretize import State, TwoPhaseProblem, phase_mass
from twophase.grid import build_grid
from twophase.precond import PreconditionerSpec
from twophase.rockfluid import MILLIDARCY, BrooksCoreyCapillary, FluidProps, RockProps
from twophase.sim import NewtonDiverged, NewtonParams, newton_step, run_simulation


@pytest.fixture
def problem():
    return small_problem(rate=1e-6)


def _initial(problem):
    return State.uniform(problem.num_cells, 1e5, 0.8)


def test_newton_converges_quadratically(problem):
    res = newton_step(problem, _initial(problem), 20 * DAY, PreconditionerSpec("exact"),
                      NewtonParams(abs_tol=1e-10))
    norms = np.array(res.residual_norms)
    assert norms[-1] <= 1e-10
    # above the rounding floor e_{k+1} / e_k^2 stays bounded
    pairs = [(a, b) for a, b in zip(norms, norms[1:]) if a < 1e-2 * norms[0] and b > 1e-8]
    assert pairs
    q = [b / a**2 for a, b in pairs]
    assert max(q) <= 10 * min(q) + 1e-3
    ratios = [b / a for a, b in pairs]
    assert all(r2 < r1 for r1, r2 in zip(ratios, ratios[1:]))


@pytest.mark.parametrize("method", ["amg", "cpr1", "cpr2", "bf"])
def test_newton_count_does_not_depend_on_inner_solver(problem, method):
    params = NewtonParams()
    exact = newton_step(problem, _initial(problem), 20 * DAY, PreconditionerSpec(method, exact_inner=True), params)
    vcycle = newton_step(problem, _initial(problem), 20 * DAY, PreconditionerSpec(method), params)
    assert exact.newton_iterations == vcycle.newton_iterations
    np.testing.assert_allclose(vcycle.state.p_w, exact.state.p_w, rtol=1e-6)


def test_no_flow_uniform_state_is_stationary():
    g = build_grid(5, 1, 5, 5.0, 1.0, 5.0, gravity_axis=None)
    n = g.num_cells
    prob = TwoPhaseProblem(g, RockProps(np.full(n, 0.2), np.full((n, 3), 100 * MILLIDARCY)), FluidProps(),
                           BrooksCoreyCapillary(1e6, 2.5))
    init = State.uniform(n, 1e5, 0.5)
    result = run_simulation(prob, init, 10 * DAY, 30 * DAY)
    assert result.metrics.converged
    assert all(s.newton_iterations <= 1 for s in result.metrics.steps)
    np.testing.assert_allclose(result.state.s_n, 0.5, atol=1e-12)
    np.testing.assert_allclose(result.state.p_w, 1e5, rtol=1e-12)


def test_metrics_sum_over_steps(problem):
    result = run_simulation(problem, _initial(problem), 10 * DAY, 40 * DAY)
    m = result.metrics
    assert len(m.steps) == 4 and m.converged
    assert m.newton_iterations == sum(s.newton_iterations for s in m.steps)
    assert m.linear_iterations == sum(s.linear_iterations for s in m.steps)
    assert m.li_per_ni == pytest.approx(m.linear_iterations / m.newton_iterations)
    assert m.as_dict()["NI"] == m.newton_iterations


def test_partial_last_step(problem):
    result = run_simulation(problem, _initial(problem), 15 * DAY, 40 * DAY)
    dts = [s.dt for s in result.metrics.steps]
    assert dts == pytest.approx([15 * DAY, 15 * DAY, 10 * DAY])
    assert result.metrics.steps[-1].t_end == pytest.approx(40 * DAY)


def test_run_mass_balance(problem):
    init = _initial(problem)
    result = run_simulation(problem, init, 10 * DAY, 50 * DAY)
    for water, oil in result.mass_balance:
        for mb in (water, oil):
            scale = max(abs(mb.storage_change), abs(mb.boundary_outflow), 1e-30)
            assert abs(mb.imbalance) <= 1e-6 * scale + 1e-12
    w0, n0 = phase_mass(problem, init)
    w1, n1 = phase_mass(problem, result.state)
    total_w = sum(w.storage_change for w, _ in result.mass_balance)
    total_n = sum(o.storage_change for _, o in result.mass_balance)
    assert total_w == pytest.approx(w1 - w0, rel=1e-9)
    assert total_n == pytest.approx(n1 - n0, rel=1e-9)


def test_failed_run_reports_step():
    prob = small_problem(rate=1e3)
    params = NewtonParams(max_newton=1)
    result = run_simulation(prob, _initial(prob), 20 * DAY, 40 * DAY, params=params, allow_cut=False)
    assert not result.metrics.converged
    assert result.metrics.failed_step == 0
    assert "NewtonDiverged" in result.metrics.failure


def test_newton_cap_raises(problem):
    with pytest.raises(NewtonDiverged):
        newton_step(problem, _initial(problem), 20 * DAY, params=NewtonParams(max_newton=1, abs_tol=1e-300))


def test_methods_share_newton_history():
    sc = load_scenario(CONFIGS / "gravity_diffusion.cfg")
    counts = {m: simulate(sc, m).metrics for m in ("cpr1", "cpr2", "bf")}
    ni = {m.newton_iterations for m in counts.values()}
    assert len(ni) == 1
    assert all(m.converged for m in counts.values())


def test_scenario_initial_state():
    sc = load_scenario(CONFIGS / "gravity_diffusion.cfg")
    prob = build_problem(sc)
    init = initial_state(sc)
    assert init.num_cells == prob.num_cells == sc.num_cells
