"""Scenario runs, benchmark suites and preconditioned-spectrum dumps.

Outputs are plain files: CSV with six significant digits for tables,
JSON with full double precision for everything else.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .config import ScenarioError, build_problem, initial_state, load_scenario
from .precond import build_preconditioner, canonical_method
from .sim import LinearSolveFailed, NewtonDiverged, newton_step, run_simulation
from .sparsela import dense_spectrum

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scenario", "method", "NI", "LI", "LI_per_NI", "wall_seconds", "converged", "amg_operator_complexity",
)


@dataclass(frozen=True)
class BenchmarkSuite:
    """Named (scenario, method) pairs, each run ``repetitions`` times."""

    name: str
    pairs: tuple = ()
    repetitions: int = 1

    def __post_init__(self):
        labels = [f"{sc.name}/{m}" for sc, m in self.pairs]
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        if dupes:
            raise ScenarioError(f"suite {self.name!r}: duplicate runs {', '.join(dupes)}")
        if self.repetitions < 1:
            raise ScenarioError(f"suite {self.name!r}: repetitions must be >= 1")


def _split_list(text):
    return [item.strip() for item in text.replace("\n", ",").split(",") if item.strip()]


def load_suite(path):
    """Read a ``[suite]`` file: every listed scenario crossed with every method."""
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(), source=str(path))
    except (OSError, configparser.Error) as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    if not cp.has_section("suite"):
        raise ScenarioError(f"{path}: missing [suite] section")
    sec = cp["suite"]
    unknown = set(sec) - {"name", "scenarios", "methods", "repetitions"}
    if unknown:
        raise ScenarioError(f"{path}: [suite] unknown field(s) {', '.join(sorted(unknown))}")
    try:
        methods = [canonical_method(m) for m in _split_list(sec.get("methods", ""))]
        repetitions = int(sec.get("repetitions", "1"))
    except ValueError as exc:
        raise ScenarioError(f"{path}: [suite] {exc}") from None
    scenarios = [load_scenario(path.parent / p) for p in _split_list(sec.get("scenarios", ""))]
    names = [sc.name for sc in scenarios]
    if len(set(names)) != len(names):
        raise ScenarioError(f"{path}: scenario names must be unique, got {names}")
    pairs = tuple((sc, m) for sc in scenarios for m in methods)
    return BenchmarkSuite(sec.get("name", path.stem), pairs, repetitions)


def simulate(scenario, method=None, snapshots=None):
    """Run a scenario, optionally overriding its preconditioner method."""
    spec = scenario.precond if method is None else scenario.precond.with_variant(method)
    snaps = scenario.output.snapshots if snapshots is None else snapshots
    return run_simulation(build_problem(scenario), initial_state(scenario), scenario.dt, scenario.t_final,
                          spec, scenario.newton, snapshots=snaps, allow_cut=scenario.allow_cut)


def _run_pair(scenario, method, repetitions):
    walls = []
    detail = None
    for _ in range(repetitions):
        tic = time.perf_counter()
        try:
            result = simulate(scenario, method, snapshots=False)
            metrics = result.metrics
            detail = metrics.as_dict()
        except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
            # setup failures (zero pivots, singular coarse grids) count as non-convergence
            detail = {"NI": 0, "LI": 0, "LI_per_NI": float("nan"), "converged": False,
                      "failure": f"{type(exc).__name__}: {exc}", "steps": [],
                      "amg_operator_complexity": float("nan")}
        walls.append(time.perf_counter() - tic)
    detail["wall_seconds"] = float(np.median(walls))
    row = {
        "scenario": scenario.name,
        "method": method,
        "NI": detail["NI"],
        "LI": detail["LI"],
        "LI_per_NI": detail["LI_per_NI"],
        "wall_seconds": detail["wall_seconds"],
        "converged": bool(detail["converged"]),
        "amg_operator_complexity": detail["amg_operator_complexity"],
    }
    return row, detail


def _fmt_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt_cell(row[c]) for c in CSV_COLUMNS])


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default, allow_nan=True))


def run_benchmark(suite: BenchmarkSuite, out_dir=None, workers=1):
    """Run every pair of the suite; failures become rows with ``converged=False``.

    Returns the list of CSV rows.  With ``out_dir`` the table is written to
    ``<suite>.csv`` and the per-step detail to ``<suite>.json``.
    """
    jobs = [(sc, m, suite.repetitions) for sc, m in suite.pairs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_pair, *zip(*jobs)))
    else:
        results = [_run_pair(*job) for job in jobs]
    rows = [row for row, _ in results]
    for row in rows:
        log.info("%s %s: NI=%s LI=%s converged=%s", row["scenario"], row["method"], row["NI"], row["LI"],
                 row["converged"])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(rows, out / f"{suite.name}.csv")
        write_json({"suite": suite.name, "repetitions": suite.repetitions,
                    "runs": [{**row, "detail": detail} for row, detail in results]},
                   out / f"{suite.name}.json")
    return rows


def write_state_csv(problem, state, path):
    centers = problem.grid.cell_centers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "x", "y", "z", "p_w", "s_w"])
        for i in range(state.num_cells):
            writer.writerow([i, *(repr(float(c)) for c in centers[i]), repr(float(state.p_w[i])),
                             repr(float(state.s_w[i]))])


def run_scenario(scenario, out_dir=None):
    """Run one scenario and write ``metrics.json``, ``final_state.csv`` and snapshots."""
    problem = build_problem(scenario)
    result = run_simulation(problem, initial_state(scenario), scenario.dt, scenario.t_final, scenario.precond,
                            scenario.newton, snapshots=scenario.output.snapshots, allow_cut=scenario.allow_cut)
    out = Path(out_dir) if out_dir is not None else scenario.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    report = {"scenario": scenario.name, "method": scenario.precond.variant, **result.metrics.as_dict()}
    report["mass_balance_kg"] = [
        {phase: {"storage_change": mb.storage_change, "boundary_outflow": mb.boundary_outflow,
                 "source": mb.source_mass, "imbalance": mb.imbalance}
         for phase, mb in zip(("water", "oil"), pair)}
        for pair in result.mass_balance
    ]
    write_json(report, out / "metrics.json")
    write_state_csv(problem, result.state, out / "final_state.csv")
    if result.snapshots:
        np.savez_compressed(
            out / "snapshots.npz",
            t=np.array([t for t, _ in result.snapshots]),
            p_w=np.array([s.p_w for _, s in result.snapshots]),
            s_n=np.array([s.s_n for _, s in result.snapshots]),
        )
    return result


class _Captured(Exception):
    pass


def capture_jacobian(scenario, newton_index=0):
    """Jacobian at Newton iteration ``newton_index`` of the first time step.

    The step is solved with a direct inner solver so the capture does not
    depend on any preconditioner converging.
    """
    problem = build_problem(scenario)
    spec = scenario.precond.with_variant("exact")
    box = {}

    def grab(k, jac, residual):
        if k == newton_index:
            box["jac"] = jac
            raise _Captured

    try:
        result = newton_step(problem, initial_state(scenario), min(scenario.dt, scenario.t_final), spec,
                             scenario.newton, on_jacobian=grab)
    except _Captured:
        return box["jac"]
    except (NewtonDiverged, LinearSolveFailed) as exc:
        raise RuntimeError(f"first step failed before Newton iteration {newton_index}: {exc}") from exc
    raise ValueError(f"the first step converged after {result.newton_iterations} Newton iteration(s); "
                     f"no Jacobian with index {newton_index}")


def preconditioned_spectrum(jac, spec, method, max_unknowns=2000):
    """Eigenvalues of ``J M^{-1}`` with exact inner solves."""
    n = jac.shape[0]
    if n > max_unknowns:
        raise ValueError(f"{n} unknowns exceed the spectrum limit of {max_unknowns}")
    pc = build_preconditioner(jac, replace(spec.with_variant(method), exact_inner=True))
    J = jac.matrix
    op = LinearOperator(jac.shape, matvec=lambda v: J @ pc.matvec(v), dtype=float)
    return dense_spectrum(op, max_n=max_unknowns, check_samples=2)


def dump_spectrum(scenario, method, newton_index, out_path, max_unknowns=2000):
    """Write ``re,im`` of every eigenvalue of ``J M^{-1}`` to ``out_path``."""
    n = 2 * scenario.num_cells
    if n > max_unknowns:
        raise ValueError(f"{n} unknowns exceed the spectrum limit of {max_unknowns}")
    jac = capture_jacobian(scenario, newton_index)
    vals = preconditioned_spectrum(jac, scenario.precond, canonical_method(method), max_unknowns)
    vals = vals[np.lexsort((vals.imag, vals.real))]
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im"])
        for v in vals:
            writer.writerow([repr(float(v.real)), repr(float(v.imag))])
    return vals
