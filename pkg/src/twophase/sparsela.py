"""Sparse kernels, right-preconditioned restarted GMRES and a dense spectrum probe."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

log = logging.getLogger(__name__)


class DimensionError(ValueError):
    pass


class SpectrumError(RuntimeError):
    pass


def spmv(A, x):
    """``A @ x`` for a CSR matrix with a dimension check."""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


def as_operator(A):
    if A is None:
        return None
    if isinstance(A, LinearOperator):
        return A
    return aslinearoperator(A)


@dataclass
class KrylovStats:
    iterations: int = 0
    final_relative_residual: float = np.inf
    converged: bool = False
    breakdown: bool = False
    estimated_relative_residual: float = np.inf
    attainable_relative_residual: float = 0.0
    residual_history: list | None = None


def _rounding_floor(A, x, bnorm):
    """Backward-error floor ``c * eps * || |A| |x| || / ||b||`` (0 if A is matrix-free)."""
    mat = getattr(A, "A", None)
    if mat is None or not sp.issparse(mat):
        return 0.0
    return 10.0 * np.finfo(float).eps * np.linalg.norm(abs(mat) @ np.abs(x)) / bnorm


def gmres(A, b, M=None, rel_tol=1e-12, max_iters=2000, restart=200, x0=None, keep_history=False):
    """Restarted GMRES with right preconditioning, ``A M^{-1} y = b, x = M^{-1} y``.

    Arnoldi uses modified Gram-Schmidt with a second pass whenever the new
    basis vector retains more than 1e-8 of its norm along the old basis.
    A cycle stops once the Arnoldi residual estimate meets ``rel_tol``; the
    iterate is then checked against the true residual, which must satisfy
    ``||b - A x|| <= max(rel_tol, floor) * ||b||`` where ``floor`` is the
    rounding level ``10 eps || |A| |x| || / ||b||`` (known only when ``A``
    is a sparse matrix).  Failing that, GMRES restarts.  ``iterations``
    counts Arnoldi steps over all restart cycles.

    Returns ``(x, KrylovStats)``; on failure ``x`` is the best iterate seen.
    """
    A = as_operator(A)
    M = as_operator(M)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"operator shape {A.shape} does not match rhs length {n}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    restart = max(1, min(restart, n))

    stats = KrylovStats(residual_history=[] if keep_history else None)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        stats.final_relative_residual = 0.0
        stats.converged = True
        return np.zeros(n), stats
    target = rel_tol * bnorm

    r = b - A.matvec(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    best_x, best_res = x.copy(), beta
    if keep_history:
        stats.residual_history.append(beta / bnorm)
    if beta <= target:
        stats.final_relative_residual = beta / bnorm
        stats.converged = True
        return x, stats

    while stats.iterations < max_iters:
        V = np.zeros((restart + 1, n))
        H = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        V[0] = r / beta
        g[0] = beta
        k = 0
        happy = False
        Z = None if M is None else np.zeros((restart, n))
        for j in range(restart):
            if stats.iterations >= max_iters:
                break
            z = V[j] if M is None else M.matvec(V[j])
            if Z is not None:
                Z[j] = z
            w = np.asarray(A.matvec(z), dtype=float).ravel()
            if not np.all(np.isfinite(w)):
                stats.breakdown = True
                log.debug("gmres: non-finite Krylov vector at step %d", stats.iterations)
                k = j
                break
            wnorm0 = np.linalg.norm(w)
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] += h
                w -= h * V[i]
            hnext = np.linalg.norm(w)
            if hnext > 0:
                overlap = np.abs(V[: j + 1] @ w).max() / hnext
                if overlap > 1e-8:
                    for i in range(j + 1):
                        h = V[i] @ w
                        H[i, j] += h
                        w -= h * V[i]
                    hnext = np.linalg.norm(w)
            H[j + 1, j] = hnext
            stats.iterations += 1
            k = j + 1
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            est = abs(g[j + 1])
            if keep_history:
                stats.residual_history.append(est / bnorm)
            if hnext <= 1e-14 * max(wnorm0, 1e-300):
                happy = True
                stats.breakdown = True
                break
            if est <= target:
                break
            V[j + 1] = w / hnext

        if k == 0:
            break
        y = scipy.linalg.solve_triangular(H[:k, :k], g[:k], check_finite=False)
        if not np.all(np.isfinite(y)):
            break
        if M is None:
            x = x + V[:k].T @ y
        else:
            x = x + Z[:k].T @ y
        r = b - A.matvec(x)
        prev_best = best_res
        beta = np.linalg.norm(r)
        stats.estimated_relative_residual = abs(g[k]) / bnorm
        if beta < best_res:
            best_x, best_res = x.copy(), beta
        if beta <= target:
            stats.converged = True
            break
        if abs(g[k]) <= target:
            floor = _rounding_floor(A, x, bnorm)
            stats.attainable_relative_residual = floor
            if beta <= floor * bnorm:
                stats.converged = True
                break
        if not np.isfinite(beta):
            break
        if happy and beta >= 0.999 * prev_best:
            # invariant subspace reached without progress: restarting cannot help
            break
    stats.final_relative_residual = (beta if stats.converged else best_res) / bnorm
    if not stats.converged:
        x = best_x
    return x, stats


def materialize(A, n=None):
    """Dense matrix of an operator by applying it to the canonical basis."""
    A = as_operator(A)
    n = A.shape[1] if n is None else n
    if A.shape != (n, n):
        raise DimensionError(f"operator shape {A.shape} does not match n={n}")
    out = np.empty((n, n))
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        out[:, k] = A.matvec(e)
        e[k] = 0.0
    return out


def dense_spectrum(A, n=None, max_n=2000, check_samples=8, seed=0):
    """All eigenvalues of a small operator.

    The operator is materialised column by column and handed to LAPACK's
    Hessenberg reduction plus shifted QR.  A sample of eigenpairs is then
    verified by inverse iteration: ``||A v - lam v|| <= 1e-8 ||A||``.
    """
    A = as_operator(A)
    n = A.shape[1] if n is None else n
    if n > max_n:
        raise SpectrumError(f"operator of size {n} exceeds the dense limit {max_n}")
    dense = materialize(A, n)
    if not np.all(np.isfinite(dense)):
        raise SpectrumError("operator produced non-finite entries")
    try:
        vals = scipy.linalg.eigvals(dense, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SpectrumError(f"QR iteration did not converge: {exc}") from exc
    if check_samples:
        _verify_eigenpairs(dense, vals, check_samples, seed)
    return vals


def _verify_eigenpairs(dense, vals, samples, seed):
    n = dense.shape[0]
    norm = np.linalg.norm(dense, 2) if n <= 400 else np.linalg.norm(dense, "fro")
    rng = np.random.default_rng(seed)
    picks = rng.choice(n, size=min(samples, n), replace=False)
    for k in picks:
        lam = vals[k]
        shift = lam + 1e-10 * max(norm, 1.0) * (1 + 1j)
        lu = scipy.linalg.lu_factor(dense.astype(complex) - shift * np.eye(n), check_finite=False)
        v = rng.standard_normal(n) + 0j
        for _ in range(3):
            v = scipy.linalg.lu_solve(lu, v, check_finite=False)
            v /= np.linalg.norm(v)
        resid = np.linalg.norm(dense @ v - lam * v)
        if resid > 1e-8 * max(norm, 1.0):
            log.warning("eigenpair check: residual %.3e for lambda=%s", resid, lam)
            raise SpectrumError(f"eigenvalue {lam} failed the residual check ({resid:.3e})")


def write_matrix_market(path, A, comment=""):
    """Coordinate real general MatrixMarket export."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", symmetry="general")


def read_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))
