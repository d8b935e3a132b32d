"""Backward-Euler time stepping with Newton-GMRES and per-iteration preconditioning."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .discretize import POINT, State, assemble_jacobian, assemble_residual, mass_balance
from .precond import PreconditionerSpec, build_preconditioner
from .sparsela import KrylovStats, gmres

log = logging.getLogger(__name__)


class NewtonDiverged(RuntimeError):
    pass


class LinearSolveFailed(RuntimeError):
    def __init__(self, stats: KrylovStats, newton_iteration: int):
        self.stats = stats
        self.newton_iteration = newton_iteration
        super().__init__(
            f"GMRES did not converge at Newton iteration {newton_iteration}: "
            f"{stats.iterations} iterations, relative residual {stats.final_relative_residual:.3e}"
        )


@dataclass(frozen=True)
class NewtonParams:
    abs_tol: float = 1e-6
    max_newton: int = 50
    linear_rel_tol: float = 1e-12
    linear_max_iters: int = 2000
    restart: int = 200
    line_search: bool = False
    scaled_norm: bool = False
    ordering: str = POINT

    def __post_init__(self):
        if not (self.abs_tol > 0 and 0 < self.linear_rel_tol < 1):
            raise ValueError("tolerances must be positive (linear_rel_tol below 1)")
        if self.max_newton < 1 or self.linear_max_iters < 1 or self.restart < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class NewtonResult:
    state: State
    newton_iterations: int
    linear_iterations: int
    residual_norms: list
    linear_stats: list
    amg_operator_complexity: float = float("nan")


@dataclass
class StepRecord:
    index: int
    t_end: float
    dt: float
    newton_iterations: int
    linear_iterations: int
    wall_seconds: float
    cut: bool = False
    residual_norms: list = field(default_factory=list)


@dataclass
class SolveMetrics:
    steps: list = field(default_factory=list)
    step_cut_count: int = 0
    failure: str | None = None
    failed_step: int | None = None
    amg_operator_complexity: float = float("nan")
    wall_seconds: float = 0.0

    @property
    def converged(self):
        return self.failure is None

    @property
    def newton_iterations(self):
        return sum(s.newton_iterations for s in self.steps)

    @property
    def linear_iterations(self):
        return sum(s.linear_iterations for s in self.steps)

    @property
    def li_per_ni(self):
        ni = self.newton_iterations
        return self.linear_iterations / ni if ni else float("nan")

    @property
    def ni_per_step(self):
        return self.newton_iterations / len(self.steps) if self.steps else float("nan")

    def as_dict(self):
        return {
            "NI": self.newton_iterations,
            "LI": self.linear_iterations,
            "LI_per_NI": self.li_per_ni,
            "NI_per_step": self.ni_per_step,
            "step_cut_count": self.step_cut_count,
            "converged": self.converged,
            "failure": self.failure,
            "failed_step": self.failed_step,
            "wall_seconds": self.wall_seconds,
            "amg_operator_complexity": self.amg_operator_complexity,
            "steps": [
                {
                    "index": s.index, "t_end": s.t_end, "dt": s.dt, "NI": s.newton_iterations,
                    "LI": s.linear_iterations, "wall_seconds": s.wall_seconds, "cut": s.cut,
                    "residual_norms": list(s.residual_norms),
                }
                for s in self.steps
            ],
        }


def _nanmax(a, b):
    if np.isnan(a):
        return float(b)
    if np.isnan(b):
        return float(a)
    return float(max(a, b))


def _norm(problem, res, params):
    if not params.scaled_norm:
        return float(np.linalg.norm(res))
    fl = problem.fluid
    scaled = res.copy()
    if params.ordering == POINT:
        scaled[0::2] /= fl.rho_w
        scaled[1::2] /= fl.rho_n
    else:
        n = len(res) // 2
        scaled[:n] /= fl.rho_w
        scaled[n:] /= fl.rho_n
    return float(np.linalg.norm(scaled))


def newton_step(problem, state_old, dt, spec: PreconditionerSpec | None = None,
                params: NewtonParams | None = None, initial_guess=None, on_jacobian=None):
    """Solve one backward-Euler step.  ``on_jacobian(k, jac, residual)`` sees every Jacobian."""
    spec = spec or PreconditionerSpec()
    params = params or NewtonParams()
    ordering = params.ordering
    state = (initial_guess or state_old).copy()
    res = assemble_residual(problem, state, state_old, dt, ordering)
    norms = [_norm(problem, res, params)]
    lin_total = 0
    lin_stats = []
    oc = float("nan")
    k = 0
    while norms[-1] > params.abs_tol:
        if k >= params.max_newton:
            raise NewtonDiverged(f"no convergence in {params.max_newton} Newton iterations "
                                 f"(|F| = {norms[-1]:.3e})")
        jac = assemble_jacobian(problem, state, state_old, dt, ordering)
        if on_jacobian is not None:
            on_jacobian(k, jac, res)
        pc = build_preconditioner(jac, spec)
        if pc is not None:
            oc = _nanmax(oc, getattr(pc, "amg_operator_complexity", np.nan))
        delta, stats = gmres(jac.matrix, -res, pc, params.linear_rel_tol, params.linear_max_iters, params.restart)
        lin_total += stats.iterations
        lin_stats.append(stats)
        k += 1
        if not stats.converged:
            raise LinearSolveFailed(stats, k)
        u = state.to_vector(ordering)
        step = 1.0
        trial = State.from_vector(u + delta, ordering)
        res_new = assemble_residual(problem, trial, state_old, dt, ordering) if trial.is_finite() else None
        if params.line_search:
            while (res_new is None or _norm(problem, res_new, params) > (1 - 1e-4 * step) * norms[-1]) and step > 1 / 32:
                step *= 0.5
                trial = State.from_vector(u + step * delta, ordering)
                res_new = assemble_residual(problem, trial, state_old, dt, ordering)
        if res_new is None or not np.all(np.isfinite(res_new)):
            raise NewtonDiverged(f"non-finite state or residual at Newton iteration {k}")
        state, res = trial, res_new
        norms.append(_norm(problem, res, params))
        log.debug("newton %d: |F| = %.3e, gmres its = %d", k, norms[-1], stats.iterations)
    return NewtonResult(state, k, lin_total, norms, lin_stats, oc)


@dataclass
class SimulationResult:
    metrics: SolveMetrics
    state: State
    snapshots: list = field(default_factory=list)
    mass_balance: list = field(default_factory=list)


def run_simulation(problem, initial: State, dt, t_final, spec=None, params=None, snapshots=False,
                   allow_cut=True):
    """Advance from t=0 to ``t_final`` with fixed steps ``dt`` (seconds).

    A failed step is retried once as two half steps; a second failure ends
    the run and the returned metrics carry the failure reason.
    """
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    spec = spec or PreconditionerSpec()
    params = params or NewtonParams()
    metrics = SolveMetrics()
    result = SimulationResult(metrics, initial.copy())
    nsteps = int(np.ceil(t_final / dt - 1e-9))
    state = initial.copy()
    t = 0.0
    t_start = time.perf_counter()
    if snapshots:
        result.snapshots.append((0.0, state.copy()))
    for index in range(nsteps):
        h = min(dt, t_final - t)
        tic = time.perf_counter()
        try:
            pieces = [_advance(problem, state, h, spec, params)]
            cut = False
        except (NewtonDiverged, LinearSolveFailed) as exc:
            if not allow_cut:
                return _fail(result, metrics, index, exc, t_start, state)
            log.info("step %d failed (%s); retrying with dt/2", index, exc)
            metrics.step_cut_count += 1
            cut = True
            try:
                first = _advance(problem, state, 0.5 * h, spec, params)
                second = _advance(problem, first.state, 0.5 * h, spec, params)
                pieces = [first, second]
            except (NewtonDiverged, LinearSolveFailed) as exc2:
                return _fail(result, metrics, index, exc2, t_start, state)
        sub_state = state
        for piece in pieces:
            result.mass_balance.append(mass_balance(problem, piece.state, sub_state, h / len(pieces)))
            sub_state = piece.state
        state = pieces[-1].state
        t += h
        metrics.steps.append(StepRecord(
            index=index, t_end=t, dt=h,
            newton_iterations=sum(p.newton_iterations for p in pieces),
            linear_iterations=sum(p.linear_iterations for p in pieces),
            wall_seconds=time.perf_counter() - tic, cut=cut,
            residual_norms=[x for p in pieces for x in p.residual_norms],
        ))
        for p in pieces:
            metrics.amg_operator_complexity = _nanmax(metrics.amg_operator_complexity, p.amg_operator_complexity)
        if snapshots:
            result.snapshots.append((t, state.copy()))
    metrics.wall_seconds = time.perf_counter() - t_start
    result.state = state
    return result


def _advance(problem, state, h, spec, params):
    return newton_step(problem, state, h, spec, params)


def _fail(result, metrics, index, exc, t_start, state):
    metrics.failure = f"{type(exc).__name__}: {exc}"
    metrics.failed_step = index
    metrics.wall_seconds = time.perf_counter() - t_start
    result.state = state
    log.warning("simulation aborted at step %d: %s", index, exc)
    return result
