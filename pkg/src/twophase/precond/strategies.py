"""The four Jacobian preconditioners and their factory.

Every preconditioner is a :class:`scipy.sparse.linalg.LinearOperator`
acting on vectors in the ordering of the Jacobian it was built from.
Inner solves are plain callables ``r -> x`` so AMG V-cycles, ILU(0) and
exact sparse LU can be swapped freely (the exact variants feed the
spectrum study and the matrix-form checks).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, splu

from ..discretize import POINT, VARIABLE, BlockJacobian
from .amg import AmgParams, amg_setup
from .ilu0 import ilu0_factor

COUPLED_AMG = "amg"
CPR_AMG1 = "cpr1"
CPR_AMG2 = "cpr2"
BLOCK_FACTORIZATION = "bf"
EXACT = "exact"
NONE = "none"

METHODS = (COUPLED_AMG, CPR_AMG1, CPR_AMG2, BLOCK_FACTORIZATION)

_ALIASES = {
    "amg": COUPLED_AMG, "coupledamg": COUPLED_AMG, "coupled_amg": COUPLED_AMG,
    "cpr1": CPR_AMG1, "cpramg1": CPR_AMG1, "cpr-amg(1)": CPR_AMG1, "cpr_amg1": CPR_AMG1,
    "cpr2": CPR_AMG2, "cpramg2": CPR_AMG2, "cpr-amg(2)": CPR_AMG2, "cpr_amg2": CPR_AMG2,
    "bf": BLOCK_FACTORIZATION, "blockfactorization": BLOCK_FACTORIZATION,
    "block_factorization": BLOCK_FACTORIZATION,
    "exact": EXACT, "none": NONE, "identity": NONE,
}

DISPLAY_NAMES = {
    COUPLED_AMG: "AMG", CPR_AMG1: "CPR-AMG(1)", CPR_AMG2: "CPR-AMG(2)",
    BLOCK_FACTORIZATION: "BF", EXACT: "exact", NONE: "none",
}


def canonical_method(name: str) -> str:
    key = str(name).strip().lower().replace(" ", "")
    if key not in _ALIASES:
        raise ValueError(f"unknown preconditioner {name!r}; choose from amg, cpr1, cpr2, bf")
    return _ALIASES[key]


class SchurError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class PreconditionerSpec:
    variant: str = BLOCK_FACTORIZATION
    amg: AmgParams = field(default_factory=AmgParams)
    coupled_amg: AmgParams = field(default_factory=lambda: AmgParams(theta=0.5))
    ilu_ordering: str = POINT
    schur_as_printed: bool = False
    exact_inner: bool = False
    pressure_scale: float = 1e5

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_method(self.variant))
        if not self.pressure_scale > 0:
            raise ValueError("pressure_scale must be positive")
        if self.ilu_ordering not in (POINT, VARIABLE):
            raise ValueError(f"unknown ILU ordering {self.ilu_ordering!r}")

    def with_variant(self, variant):
        return replace(self, variant=variant)


def _exact_solver(A):
    lu = splu(sp.csc_matrix(A))
    return lu.solve


def _ordered(solve, jac: BlockJacobian, ordering):
    """Wrap a solve defined in ``ordering`` so it acts in ``jac.ordering``."""
    if ordering == jac.ordering:
        return solve
    other = jac.reordered(ordering)

    def apply(r):
        x = solve(jac.permute_vector(r, ordering))
        return other.permute_vector(x, jac.ordering)

    return apply


class _Preconditioner(LinearOperator):
    def __init__(self, jac: BlockJacobian):
        self.jac = jac
        self.fields = jac.fields
        n = jac.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))

    def _matvec(self, r):
        return self.apply(np.asarray(r, dtype=float).ravel())

    def stats(self):
        return {}


class CprAmg1(_Preconditioner):
    """Two-stage combinative: global smoother, then a pressure correction."""

    def __init__(self, jac, p1_solve, pp_solve):
        super().__init__(jac)
        self.p1_solve = p1_solve
        self.pp_solve = pp_solve

    def apply(self, r):
        u1 = self.p1_solve(r)
        r1 = r - self.jac.matrix @ u1
        dp = self.pp_solve(self.fields.restrict_p(r1))
        return u1 + self.fields.extend(p=dp)


class CprAmg2(_Preconditioner):
    """Two-stage additive: global smoother, then pressure and saturation corrections."""

    def __init__(self, jac, p1_solve, pp_solve, ss_solve):
        super().__init__(jac)
        self.p1_solve = p1_solve
        self.pp_solve = pp_solve
        self.ss_solve = ss_solve

    def apply(self, r):
        u1 = self.p1_solve(r)
        r1 = r - self.jac.matrix @ u1
        dp = self.pp_solve(self.fields.restrict_p(r1))
        ds = self.ss_solve(self.fields.restrict_s(r1))
        return u1 + self.fields.extend(p=dp, s=ds)


class BlockFactorization(_Preconditioner):
    """Upper block-triangular solve with the diagonal-approximated Schur complement."""

    def __init__(self, jac, ss_solve, schur_solve):
        super().__init__(jac)
        self.ss_solve = ss_solve
        self.schur_solve = schur_solve
        self._A_ps = jac.A_ps

    def apply(self, r):
        s = self.ss_solve(self.fields.restrict_s(r))
        rp = self.fields.restrict_p(r) - self._A_ps @ s
        p = self.schur_solve(rp)
        return self.fields.extend(p=p, s=s)


class CoupledAmg(_Preconditioner):
    """One V-cycle of scalar AMG on the point-ordered coupled matrix.

    Pressure unknowns are measured in units of ``pressure_scale`` Pa before
    coarsening (``J D`` with ``D = diag(pressure_scale, 1, ...)``), so that
    pressure and saturation couplings are compared on a like footing by the
    strength test.  The operator returned is ``D (J D)_amg^{-1}``.
    """

    def __init__(self, jac, params: AmgParams, pressure_scale=1.0):
        super().__init__(jac)
        point = jac.reordered(POINT)
        n = point.n_cells
        d = np.ones(2 * n)
        d[0::2] = pressure_scale
        self._scale = d
        self.hierarchy = amg_setup(point.matrix @ sp.diags(d), params)

        def solve(r):
            return self._scale * self.hierarchy.vcycle(r)

        self._solve = _ordered(solve, jac, POINT)

    def apply(self, r):
        return self._solve(r)


class ExactInverse(_Preconditioner):
    def __init__(self, jac):
        super().__init__(jac)
        self._solve = _exact_solver(jac.matrix)

    def apply(self, r):
        return self._solve(r)


def build_simple_schur(jac: BlockJacobian, as_printed=False):
    """``A_pp - A_ps diag(A_ss)^{-1} A_sp`` (or ``... A_pp`` when ``as_printed``)."""
    d = jac.A_ss.diagonal()
    zero = np.flatnonzero(d == 0)
    if len(zero):
        raise SchurError(f"zero diagonal of A_ss in cell {int(zero[0])}")
    right = jac.A_pp if as_printed else jac.A_sp
    S = jac.A_pp - jac.A_ps @ sp.diags(1.0 / d) @ right
    S = sp.csr_matrix(S)
    S.sum_duplicates()
    S.sort_indices()
    return S


def _attach_stats(pc, hierarchies):
    total = 0.0
    for h in hierarchies:
        total = max(total, h.operator_complexity())
    pc.hierarchies = hierarchies
    pc.amg_operator_complexity = total if hierarchies else float("nan")
    return pc


def build_preconditioner(jac: BlockJacobian, spec: PreconditionerSpec | None = None):
    """Set up the preconditioner named by ``spec.variant`` for this Jacobian.

    With ``spec.exact_inner`` the AMG V-cycles on A_pp, A_ss and the Schur
    approximation are replaced by sparse direct solves; ILU(0) stays.
    """
    spec = spec or PreconditionerSpec()
    v = spec.variant
    if v == NONE:
        return None
    if v == EXACT:
        return _attach_stats(ExactInverse(jac), [])
    if v == COUPLED_AMG:
        pc = CoupledAmg(jac, spec.coupled_amg, spec.pressure_scale)
        return _attach_stats(pc, [pc.hierarchy])

    hierarchies = []

    def inner(A):
        if spec.exact_inner:
            return _exact_solver(A)
        h = amg_setup(A, spec.amg)
        hierarchies.append(h)
        return h.vcycle

    if v in (CPR_AMG1, CPR_AMG2):
        ilu_jac = jac.reordered(spec.ilu_ordering)
        ilu = ilu0_factor(ilu_jac.matrix)
        p1 = _ordered(ilu.solve, jac, spec.ilu_ordering)
        pp = inner(jac.A_pp)
        if v == CPR_AMG1:
            pc = CprAmg1(jac, p1, pp)
        else:
            pc = CprAmg2(jac, p1, pp, inner(jac.A_ss))
        pc.ilu = ilu
        return _attach_stats(pc, hierarchies)

    if v == BLOCK_FACTORIZATION:
        ss = inner(jac.A_ss)
        schur = build_simple_schur(jac, spec.schur_as_printed)
        pc = BlockFactorization(jac, ss, inner(schur))
        pc.schur = schur
        return _attach_stats(pc, hierarchies)
    raise ValueError(f"unhandled preconditioner variant {v!r}")
