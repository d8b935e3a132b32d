"""Classical (Ruge-Stuben) algebraic multigrid.

Setup: strength of connection, two-pass RS coarsening, direct + standard
interpolation, Galerkin coarse operators.  Application: one V(1,1) cycle
with forward Gauss-Seidel smoothing and a direct coarsest solve, always
started from a zero guess so the cycle is a fixed linear operator.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, splu

from .. import _kernels

log = logging.getLogger(__name__)


class AmgSetupError(RuntimeError):
    pass


@dataclass(frozen=True)
class AmgParams:
    theta: float = 0.25
    max_levels: int = 25
    coarse_size: int = 64
    strength: str = "abs"  # "abs" or "classical" (sign-aware)
    second_pass: bool = True
    cycles: int = 1

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise ValueError(f"strength threshold must be in [0, 1], got {self.theta}")
        if self.max_levels < 1 or self.coarse_size < 1 or self.cycles < 1:
            raise ValueError("max_levels, coarse_size and cycles must be >= 1")
        if self.strength not in ("abs", "classical"):
            raise ValueError(f"unknown strength measure {self.strength!r}")


@dataclass(eq=False)
class Level:
    A: sp.csr_matrix
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None
    splitting: np.ndarray | None = None
    strength: sp.csr_matrix | None = field(default=None, repr=False)


def _csr(A):
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def strength_of_connection(A, theta=0.25, kind="abs"):
    """Boolean CSR ``S`` with ``S[i, j]`` true when i strongly depends on j."""
    A = _csr(A)
    fn = _kernels.strength_abs if kind == "abs" else _kernels.strength_negative
    mask = fn(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, float(theta))
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    S = sp.csr_matrix(
        (np.ones(mask.sum(), dtype=np.int8), (rows[mask], A.indices[mask])), shape=A.shape
    )
    S.sort_indices()
    return S, mask


def rs_splitting(S, second_pass=True):
    """C/F splitting (1 = C, 0 = F) by Ruge-Stuben coarsening of ``S``."""
    n = S.shape[0]
    S = sp.csr_matrix(S)
    T = sp.csr_matrix(S.T)
    T.sort_indices()
    state = _kernels.rs_first_pass(
        n, S.indptr.astype(np.int64), S.indices.astype(np.int64),
        T.indptr.astype(np.int64), T.indices.astype(np.int64),
    )
    if second_pass:
        state = _kernels.rs_second_pass(n, S.indptr.astype(np.int64), S.indices.astype(np.int64), state)
    return state


def classical_prolongation(A, strong_mask, splitting):
    A = _csr(A)
    coarse_index = np.cumsum(splitting) - 1
    nc = int(splitting.sum())
    ptr, idx, val = _kernels.classical_interpolation(
        A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
        strong_mask, splitting.astype(np.int64), coarse_index.astype(np.int64),
    )
    return sp.csr_matrix((val, idx, ptr), shape=(A.shape[0], nc))


class _CoarseSolver:
    def __init__(self, A):
        n = A.shape[0]
        self.n = n
        self._lu = None
        self._pinv = None
        if n == 0:
            return
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                self._lu = splu(sp.csc_matrix(A))
        except (RuntimeError, Warning) as exc:
            if n > 4000:
                raise AmgSetupError(f"singular coarsest matrix of size {n}") from exc
            log.debug("coarsest matrix singular (%s); using pseudo-inverse", exc)
            self._pinv = scipy.linalg.pinv(A.toarray())

    def solve(self, b):
        if self.n == 0:
            return np.zeros(0)
        if self._lu is not None:
            return self._lu.solve(b)
        return self._pinv @ b


class AmgHierarchy:
    """Multilevel hierarchy; ``vcycle(r)`` approximates ``A^{-1} r``."""

    def __init__(self, levels, params):
        self.levels = levels
        self.params = params
        self._coarse = _CoarseSolver(levels[-1].A)

    @property
    def num_levels(self):
        return len(self.levels)

    @property
    def shape(self):
        return self.levels[0].A.shape

    def operator_complexity(self):
        return sum(lv.A.nnz for lv in self.levels) / max(self.levels[0].A.nnz, 1)

    def grid_complexity(self):
        return sum(lv.A.shape[0] for lv in self.levels) / max(self.levels[0].A.shape[0], 1)

    def stats(self):
        return {
            "levels": self.num_levels,
            "sizes": [lv.A.shape[0] for lv in self.levels],
            "operator_complexity": self.operator_complexity(),
            "grid_complexity": self.grid_complexity(),
        }

    def _cycle(self, lvl, b):
        if lvl == len(self.levels) - 1:
            return self._coarse.solve(b)
        level = self.levels[lvl]
        A = level.A
        x = np.zeros_like(b)
        _kernels.gauss_seidel_forward(A.indptr, A.indices, A.data, x, b)
        r = b - A @ x
        x += level.P @ self._cycle(lvl + 1, level.R @ r)
        _kernels.gauss_seidel_forward(A.indptr, A.indices, A.data, x, b)
        return x

    def vcycle(self, r):
        b = np.asarray(r, dtype=float)
        x = self._cycle(0, b)
        for _ in range(self.params.cycles - 1):
            x = x + self._cycle(0, b - self.levels[0].A @ x)
        return x

    def as_operator(self):
        n = self.shape[0]
        return LinearOperator((n, n), matvec=self.vcycle, dtype=float)


def amg_setup(A, params: AmgParams | None = None) -> AmgHierarchy:
    params = params or AmgParams()
    A = _csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"AMG needs a square matrix, got {A.shape}")
    if np.any(A.diagonal() == 0):
        bad = int(np.flatnonzero(A.diagonal() == 0)[0])
        raise AmgSetupError(f"zero diagonal entry in row {bad}")
    levels = [Level(A)]
    while len(levels) < params.max_levels and levels[-1].A.shape[0] > params.coarse_size:
        cur = levels[-1]
        S, mask = strength_of_connection(cur.A, params.theta, params.strength)
        if S.nnz == 0:
            break
        split = rs_splitting(S, params.second_pass)
        nc = int(split.sum())
        if nc == 0 or nc >= cur.A.shape[0]:
            log.debug("AMG coarsening stagnated at size %d", cur.A.shape[0])
            break
        P = classical_prolongation(cur.A, mask, split)
        R = sp.csr_matrix(P.T)
        Ac = _csr(R @ cur.A @ P)
        cur.P, cur.R, cur.splitting, cur.strength = P, R, split, S
        levels.append(Level(Ac))
    return AmgHierarchy(levels, params)
