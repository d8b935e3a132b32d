"""Fully implicit TPFA residual and analytic Jacobian for two-phase flow.

Unknowns per cell are the wetting-phase pressure ``p_w`` and the
non-wetting saturation ``s_n``.  Equation 0 of each cell is the wetting
(water) mass balance and equation 1 the non-wetting balance, both in the
per-unit-volume form

    R = (xi_new - xi_old) + dt/V * sum(outward face mass fluxes) - dt * Q

with ``xi = phi * rho * S``.  Two orderings of the coupled vector are
supported: ``"variable"`` groups all pressures then all saturations, and
``"point"`` interleaves ``(p_w, s_n)`` per cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .grid import Grid, harmonic_face_permeability
from .rockfluid import FluidProps, QuadraticRelPerm, RockProps

VARIABLE = "variable"
POINT = "point"
ORDERINGS = (VARIABLE, POINT)


def _check_ordering(ordering):
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}; expected 'variable' or 'point'")


@dataclass
class State:
    p_w: np.ndarray
    s_n: np.ndarray

    def __post_init__(self):
        self.p_w = np.asarray(self.p_w, dtype=float).copy()
        self.s_n = np.asarray(self.s_n, dtype=float).copy()
        if self.p_w.shape != self.s_n.shape or self.p_w.ndim != 1:
            raise ValueError("p_w and s_n must be 1-d arrays of equal length")

    @classmethod
    def uniform(cls, n, p_w, s_n):
        return cls(np.full(n, float(p_w)), np.full(n, float(s_n)))

    @property
    def num_cells(self):
        return len(self.p_w)

    @property
    def s_w(self):
        return 1.0 - self.s_n

    def copy(self):
        return State(self.p_w, self.s_n)

    def to_vector(self, ordering=POINT):
        _check_ordering(ordering)
        if ordering == VARIABLE:
            return np.concatenate([self.p_w, self.s_n])
        out = np.empty(2 * self.num_cells)
        out[0::2] = self.p_w
        out[1::2] = self.s_n
        return out

    @classmethod
    def from_vector(cls, u, ordering=POINT):
        _check_ordering(ordering)
        u = np.asarray(u, dtype=float)
        if ordering == VARIABLE:
            n = len(u) // 2
            return cls(u[:n], u[n:])
        return cls(u[0::2], u[1::2])

    def is_finite(self):
        return bool(np.all(np.isfinite(self.p_w)) and np.all(np.isfinite(self.s_n)))


@dataclass(frozen=True)
class NoFlow:
    pass


@dataclass(frozen=True)
class Dirichlet:
    """Fixed wetting pressure (Pa) and wetting saturation behind the face."""

    p_w: float
    s_w: float


@dataclass(frozen=True)
class NeumannTotalFlux:
    """Prescribed total volumetric inflow (m^3/s, positive into the domain).

    The rate applies to the whole tagged face group and is split by face
    area.  Phases enter in proportion to their fractional flow at
    ``s_w_inflow``.
    """

    rate: float
    s_w_inflow: float = 1.0


@dataclass(frozen=True, eq=False)
class SourceTerm:
    """Per-cell mass source densities Q_w, Q_n in kg/(m^3 s)."""

    q_w: np.ndarray
    q_n: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_rates(cls, grid: Grid, fluid: FluidProps, cells, rate_w, rate_n):
        """Volumetric well-style rates (m^3/s, positive = injection) in cells."""
        q_w = np.zeros(grid.num_cells)
        q_n = np.zeros(grid.num_cells)
        np.add.at(q_w, np.asarray(cells), fluid.rho_w * np.asarray(rate_w, dtype=float) / grid.cell_volume)
        np.add.at(q_n, np.asarray(cells), fluid.rho_n * np.asarray(rate_n, dtype=float) / grid.cell_volume)
        return cls(q_w, q_n)


@dataclass(frozen=True)
class FieldRestriction:
    """Index maps between the coupled 2N vector and the pressure/saturation fields."""

    p_idx: np.ndarray
    s_idx: np.ndarray

    @classmethod
    def for_ordering(cls, n, ordering):
        _check_ordering(ordering)
        if ordering == VARIABLE:
            return cls(np.arange(n), np.arange(n, 2 * n))
        return cls(np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2))

    @property
    def n(self):
        return len(self.p_idx)

    def restrict_p(self, r):
        return r[self.p_idx]

    def restrict_s(self, r):
        return r[self.s_idx]

    def extend(self, p=None, s=None):
        """``R_p^T p + R_s^T s``."""
        out = np.zeros(2 * self.n)
        if p is not None:
            out[self.p_idx] = p
        if s is not None:
            out[self.s_idx] = s
        return out

    def matrix_p(self):
        n = self.n
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.p_idx)), shape=(n, 2 * n))

    def matrix_s(self):
        n = self.n
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.s_idx)), shape=(n, 2 * n))


def point_permutation(n):
    """``perm`` with ``u_point = u_var[perm]``."""
    perm = np.empty(2 * n, dtype=np.int64)
    perm[0::2] = np.arange(n)
    perm[1::2] = np.arange(n, 2 * n)
    return perm


@dataclass(eq=False)
class BlockJacobian:
    matrix: sp.csr_matrix
    ordering: str
    n_cells: int
    fields: FieldRestriction = field(init=False)

    def __post_init__(self):
        _check_ordering(self.ordering)
        self.matrix = sp.csr_matrix(self.matrix)
        self.matrix.sort_indices()
        self.fields = FieldRestriction.for_ordering(self.n_cells, self.ordering)

    @property
    def shape(self):
        return self.matrix.shape

    def _block(self, rows, cols):
        return sp.csr_matrix(self.matrix[rows][:, cols])

    @cached_property
    def A_pp(self):
        return self._block(self.fields.p_idx, self.fields.p_idx)

    @cached_property
    def A_ps(self):
        return self._block(self.fields.p_idx, self.fields.s_idx)

    @cached_property
    def A_sp(self):
        return self._block(self.fields.s_idx, self.fields.p_idx)

    @cached_property
    def A_ss(self):
        return self._block(self.fields.s_idx, self.fields.s_idx)

    def reordered(self, ordering):
        """Same operator under another unknown ordering (exact permutation)."""
        _check_ordering(ordering)
        if ordering == self.ordering:
            return self
        perm = point_permutation(self.n_cells)
        if self.ordering == VARIABLE:  # var -> point
            mat = self.matrix[perm][:, perm]
        else:
            inv = np.argsort(perm)
            mat = self.matrix[inv][:, inv]
        return BlockJacobian(sp.csr_matrix(mat), ordering, self.n_cells)

    def permute_vector(self, v, to_ordering):
        """Convert a vector from this Jacobian's ordering to ``to_ordering``."""
        if to_ordering == self.ordering:
            return v
        perm = point_permutation(self.n_cells)
        return v[perm] if self.ordering == VARIABLE else v[np.argsort(perm)]


@dataclass(frozen=True, eq=False)
class TwoPhaseProblem:
    """Everything the residual needs apart from the states and the step size."""

    grid: Grid
    rock: RockProps
    fluid: FluidProps
    capillary: object
    relperm: object = field(default_factory=QuadraticRelPerm)
    bcs: Mapping[str, object] = field(default_factory=dict)
    sources: SourceTerm | None = None

    def __post_init__(self):
        n = self.grid.num_cells
        if self.rock.num_cells != n:
            raise ValueError(f"rock has {self.rock.num_cells} cells, grid has {n}")
        if self.sources is None:
            object.__setattr__(self, "sources", SourceTerm.zeros(n))
        elif len(self.sources.q_w) != n or len(self.sources.q_n) != n:
            raise ValueError("source arrays do not match the grid")
        tags = set(self.grid.bface_tag.tolist()) - {""}
        unknown = tags - set(self.bcs)
        if unknown:
            raise ValueError(f"boundary tags without a condition: {sorted(unknown)}")

    @property
    def num_cells(self):
        return self.grid.num_cells

    @cached_property
    def face_trans(self):
        """Geometric transmissibility gamma * K_face / dist of interior faces."""
        g = self.grid
        a, b = g.face_cells[:, 0], g.face_cells[:, 1]
        h = np.asarray(g.spacing)[g.face_axis]
        k_a = self.rock.perm[a, g.face_axis]
        k_b = self.rock.perm[b, g.face_axis]
        k_face = harmonic_face_permeability(k_a, k_b, h, h)
        return g.face_area * k_face / g.face_dist

    @cached_property
    def _boundary_groups(self):
        """(kind, face indices, per-face data) for every active boundary tag."""
        g = self.grid
        groups = []
        for tag, bc in self.bcs.items():
            faces = g.boundary_faces(tag)
            if len(faces) == 0 or isinstance(bc, NoFlow):
                continue
            groups.append((bc, faces))
        return groups

    def cell_properties(self, s_n):
        f = self.fluid
        s_w = 1.0 - s_n
        pc = np.asarray(self.capillary.pressure(s_w, self.rock), dtype=float)
        dpc_dsw = np.asarray(self.capillary.derivative(s_w, self.rock), dtype=float)
        krw, krn, dkrw, dkrn = self.relperm.evaluate(s_w, self.rock)
        return dict(
            pc=pc * np.ones_like(s_n),
            dpc=-dpc_dsw * np.ones_like(s_n),  # d/ds_n
            m_w=f.rho_w * krw / f.mu_w,
            m_n=f.rho_n * krn / f.mu_n,
            dm_w=-f.rho_w * dkrw / f.mu_w,
            dm_n=-f.rho_n * dkrn / f.mu_n,
        )

    def boundary_mobilities(self, s_w):
        f = self.fluid
        krw, krn, _, _ = self.relperm.evaluate(np.array([s_w]), self.rock)
        pc = float(np.asarray(self.capillary.pressure(np.array([s_w]), self.rock))[0])
        return f.rho_w * krw[0] / f.mu_w, f.rho_n * krn[0] / f.mu_n, pc

    def storage(self, state):
        phi = self.rock.porosity
        return phi * self.fluid.rho_w * (1.0 - state.s_n), phi * self.fluid.rho_n * state.s_n


@dataclass
class _Evaluation:
    res_w: np.ndarray
    res_n: np.ndarray
    boundary_out_w: float
    boundary_out_n: float
    triplets: tuple | None


def _check_inputs(problem, state_new, state_old, dt):
    n = problem.num_cells
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    for name, st in (("state_new", state_new), ("state_old", state_old)):
        if st.num_cells != n:
            raise ValueError(f"{name} has {st.num_cells} cells, grid has {n}")
        if not st.is_finite():
            raise ValueError(f"{name} contains non-finite values")


def _evaluate(problem: TwoPhaseProblem, new: State, old: State, dt: float, jacobian: bool) -> _Evaluation:
    _check_inputs(problem, new, old, dt)
    g, fl = problem.grid, problem.fluid
    n = g.num_cells
    scale = dt / g.cell_volume
    props = problem.cell_properties(new.s_n)
    pc, dpc = props["pc"], props["dpc"]

    xw_new, xn_new = problem.storage(new)
    xw_old, xn_old = problem.storage(old)
    res_w = xw_new - xw_old - dt * problem.sources.q_w
    res_n = xn_new - xn_old - dt * problem.sources.q_n

    # triplets: (equation, row cell, variable, column cell, value)
    eq_l, rc_l, var_l, cc_l, val_l = [], [], [], [], []

    def add(eq, rows, var, cols, vals):
        eq_l.append(np.full(len(rows), eq, dtype=np.int8))
        rc_l.append(rows)
        var_l.append(np.full(len(rows), var, dtype=np.int8))
        cc_l.append(cols)
        val_l.append(vals)

    cells = np.arange(n)
    phi = problem.rock.porosity
    if jacobian:
        add(0, cells, 0, cells, np.zeros(n))
        add(0, cells, 1, cells, -phi * fl.rho_w)
        add(1, cells, 0, cells, np.zeros(n))
        add(1, cells, 1, cells, phi * fl.rho_n)

    depth = g.cell_depth
    p = new.p_w
    a, b = g.face_cells[:, 0], g.face_cells[:, 1]
    trans = problem.face_trans
    phases = (
        (0, res_w, p - fl.rho_w * fl.g * depth, None, props["m_w"], props["dm_w"]),
        (1, res_n, p + pc - fl.rho_n * fl.g * depth, dpc, props["m_n"], props["dm_n"]),
    )
    for eq, res, pot, dpot_ds, mob, dmob in phases:
        dphi = pot[a] - pot[b]
        up = dphi > 0
        m_up = np.where(up, mob[a], mob[b])
        flux = trans * m_up * dphi
        np.add.at(res, a, scale * flux)
        np.add.at(res, b, -scale * flux)
        if not jacobian:
            continue
        d_pa = trans * m_up
        d_sa = trans * dphi * np.where(up, dmob[a], 0.0)
        d_sb = trans * dphi * np.where(up, 0.0, dmob[b])
        if dpot_ds is not None:
            d_sa = d_sa + trans * m_up * dpot_ds[a]
            d_sb = d_sb - trans * m_up * dpot_ds[b]
        for var, d_a, d_b in ((0, d_pa, -d_pa), (1, d_sa, d_sb)):
            add(eq, a, var, a, scale * d_a)
            add(eq, a, var, b, scale * d_b)
            add(eq, b, var, a, -scale * d_a)
            add(eq, b, var, b, -scale * d_b)

    out_w = out_n = 0.0
    for bc, faces in problem._boundary_groups:
        c = g.bface_cell[faces]
        if isinstance(bc, NeumannTotalFlux):
            area = g.bface_area[faces]
            q_face = bc.rate * area / area.sum()
            m_w_in, m_n_in, _ = problem.boundary_mobilities(bc.s_w_inflow)
            lam_w, lam_n = m_w_in / fl.rho_w, m_n_in / fl.rho_n
            tot = lam_w + lam_n
            if tot <= 0:
                raise ValueError("inflow saturation gives zero total mobility")
            f_w, f_n = lam_w / tot, lam_n / tot
            flux_w = -fl.rho_w * q_face * f_w
            flux_n = -fl.rho_n * q_face * f_n
            np.add.at(res_w, c, scale * flux_w)
            np.add.at(res_n, c, scale * flux_n)
            out_w += dt * flux_w.sum()
            out_n += dt * flux_n.sum()
        elif isinstance(bc, Dirichlet):
            axis = g.bface_axis[faces]
            t_b = g.bface_area[faces] * problem.rock.perm[c, axis] / g.bface_dist[faces]
            m_w_b, m_n_b, pc_b = problem.boundary_mobilities(bc.s_w)
            dbound = g.bface_depth[faces]
            bphases = (
                (0, res_w, p[c] - fl.rho_w * fl.g * depth[c],
                 bc.p_w - fl.rho_w * fl.g * dbound, None, props["m_w"][c], props["dm_w"][c], m_w_b),
                (1, res_n, p[c] + pc[c] - fl.rho_n * fl.g * depth[c],
                 bc.p_w + pc_b - fl.rho_n * fl.g * dbound, dpc[c], props["m_n"][c], props["dm_n"][c], m_n_b),
            )
            for eq, res, pot_c, pot_b, dpot_ds, mob, dmob, mob_b in bphases:
                dphi = pot_c - pot_b
                up = dphi > 0
                m_up = np.where(up, mob, mob_b)
                flux = t_b * m_up * dphi
                np.add.at(res, c, scale * flux)
                if eq == 0:
                    out_w += dt * flux.sum()
                else:
                    out_n += dt * flux.sum()
                if not jacobian:
                    continue
                d_s = t_b * dphi * np.where(up, dmob, 0.0)
                if dpot_ds is not None:
                    d_s = d_s + t_b * m_up * dpot_ds
                add(eq, c, 0, c, scale * t_b * m_up)
                add(eq, c, 1, c, scale * d_s)
        else:
            raise TypeError(f"unsupported boundary condition {bc!r}")

    trip = None
    if jacobian:
        trip = tuple(np.concatenate(x) for x in (eq_l, rc_l, var_l, cc_l, val_l))
    return _Evaluation(res_w, res_n, out_w, out_n, trip)


def _interleave(res_w, res_n, ordering):
    if ordering == VARIABLE:
        return np.concatenate([res_w, res_n])
    out = np.empty(2 * len(res_w))
    out[0::2] = res_w
    out[1::2] = res_n
    return out


def assemble_residual(problem, state_new, state_old, dt, ordering=POINT):
    """Residual vector (length 2N) of the backward-Euler TPFA system."""
    _check_ordering(ordering)
    ev = _evaluate(problem, state_new, state_old, dt, jacobian=False)
    return _interleave(ev.res_w, ev.res_n, ordering)


def assemble_jacobian(problem, state_new, state_old, dt, ordering=POINT, with_residual=False):
    """Exact analytic Jacobian d(residual)/d(p_w, s_n) as a :class:`BlockJacobian`.

    Upwind donors are frozen at their current selection; only the donor's
    own dependence on the unknowns is differentiated.
    """
    _check_ordering(ordering)
    ev = _evaluate(problem, state_new, state_old, dt, jacobian=True)
    n = problem.num_cells
    eq, rc, var, cc, val = ev.triplets
    if ordering == VARIABLE:
        rows = eq.astype(np.int64) * n + rc
        cols = var.astype(np.int64) * n + cc
    else:
        rows = 2 * rc + eq
        cols = 2 * cc + var
    mat = sp.coo_matrix((val, (rows, cols)), shape=(2 * n, 2 * n)).tocsr()
    mat.sum_duplicates()
    jac = BlockJacobian(mat, ordering, n)
    if with_residual:
        return jac, _interleave(ev.res_w, ev.res_n, ordering)
    return jac


@dataclass(frozen=True)
class MassBalance:
    """Per-phase terms of the global conservation identity (kg)."""

    storage_change: float
    boundary_outflow: float
    source_mass: float

    @property
    def imbalance(self):
        return self.storage_change + self.boundary_outflow - self.source_mass


def mass_balance(problem, state_new, state_old, dt):
    """Global mass-balance terms for the water and non-wetting phases."""
    ev = _evaluate(problem, state_new, state_old, dt, jacobian=False)
    vol = problem.grid.cell_volume
    xw_new, xn_new = problem.storage(state_new)
    xw_old, xn_old = problem.storage(state_old)
    water = MassBalance(
        vol * float(np.sum(xw_new - xw_old)), ev.boundary_out_w,
        dt * vol * float(np.sum(problem.sources.q_w)),
    )
    oil = MassBalance(
        vol * float(np.sum(xn_new - xn_old)), ev.boundary_out_n,
        dt * vol * float(np.sum(problem.sources.q_n)),
    )
    return water, oil


def phase_mass(problem, state):
    xw, xn = problem.storage(state)
    vol = problem.grid.cell_volume
    return vol * float(xw.sum()), vol * float(xn.sum())
