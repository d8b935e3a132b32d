"""Fully implicit two-phase porous-media flow with AMG-based block preconditioners."""

from .bench import run_benchmark, run_scenario, simulate
from .config import Scenario, ScenarioError, build_problem, dump_scenario, initial_state, load_scenario
from .discretize import State, TwoPhaseProblem, assemble_jacobian, assemble_residual
from .grid import build_grid
from .precond import PreconditionerSpec, build_preconditioner
from .sim import NewtonParams, newton_step, run_simulation

__version__ = "0.1.0"

__all__ = [
    "run_benchmark", "run_scenario", "simulate",
    "Scenario", "ScenarioError", "build_problem", "dump_scenario", "initial_state", "load_scenario",
    "State", "TwoPhaseProblem", "assemble_jacobian", "assemble_residual", "build_grid",
    "PreconditionerSpec", "build_preconditioner", "NewtonParams", "newton_step", "run_simulation",
]
