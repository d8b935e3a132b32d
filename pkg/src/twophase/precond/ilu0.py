"""Zero-fill incomplete LU factorisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .. import _kernels


class ZeroPivotError(ArithmeticError):
    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"ILU(0): zero or missing pivot in row {row}")


@dataclass(eq=False)
class Ilu0Factors:
    """Combined ``L\\U`` values on the pattern of A; L has an implicit unit diagonal."""

    indptr: np.ndarray
    indices: np.ndarray
    lu: np.ndarray
    diag: np.ndarray

    @property
    def n(self):
        return len(self.indptr) - 1

    def solve(self, b):
        return _kernels.ilu0_solve(self.indptr, self.indices, self.lu, self.diag, np.asarray(b, dtype=float))

    def as_operator(self):
        return LinearOperator((self.n, self.n), matvec=self.solve, dtype=float)

    def _combined(self):
        return sp.csr_matrix((self.lu, self.indices, self.indptr), shape=(self.n, self.n))

    def lower(self):
        c = self._combined()
        return sp.tril(c, k=-1, format="csr") + sp.identity(self.n, format="csr")

    def upper(self):
        return sp.triu(self._combined(), k=0, format="csr")


def ilu0_factor(A) -> Ilu0Factors:
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"ILU(0) needs a square matrix, got {A.shape}")
    A.sum_duplicates()
    A.sort_indices()
    indptr = A.indptr.astype(np.int64)
    indices = A.indices.astype(np.int64)
    lu, diag, bad = _kernels.ilu0_factor(indptr, indices, A.data.astype(np.float64))
    if bad >= 0:
        raise ZeroPivotError(int(bad))
    return Ilu0Factors(indptr, indices, lu, diag)
