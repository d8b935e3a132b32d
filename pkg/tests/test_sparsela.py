import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse.linalg import LinearOperator

from conftest import poisson2d
from twophase.precond import ilu0_factor
from twophase.sparsela import (
    DimensionError,
    SpectrumError,
    dense_spectrum,
    gmres,
    read_matrix_market,
    spmv,
    write_matrix_market,
)


def test_spmv_examples():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spmv(sp.identity(3, format="csr"), x), x)
    np.testing.assert_array_equal(spmv(sp.diags([1.0, 2.0, 3.0]).tocsr(), np.ones(3)), x)
    with pytest.raises(DimensionError):
        spmv(sp.identity(3, format="csr"), np.ones(4))


def test_spmv_matches_dense():
    A = sp.random(50, 50, density=0.1, random_state=3, format="csr")
    x = np.random.default_rng(3).standard_normal(50)
    err = np.abs(spmv(A, x) - A.toarray() @ x).max()
    assert err <= 1e-13 * np.linalg.norm(A.toarray(), 2) * np.linalg.norm(x)


def test_gmres_identity():
    b = np.random.default_rng(0).standard_normal(10)
    x, stats = gmres(sp.identity(10, format="csr"), b)
    assert stats.converged and stats.iterations == 1
    np.testing.assert_allclose(x, b, rtol=1e-14)


def test_gmres_three_eigenvalues():
    d = np.repeat([1.0, 4.0, 9.0], [7, 7, 6])
    A = sp.diags(d).tocsr()
    b = np.random.default_rng(1).standard_normal(20)
    x, stats = gmres(A, b, rel_tol=1e-12)
    assert stats.converged and stats.iterations <= 3
    np.testing.assert_allclose(x, b / d, rtol=1e-10)


def test_gmres_ilu_beats_unpreconditioned():
    A = poisson2d(16)
    b = np.random.default_rng(2).standard_normal(A.shape[0])
    x0, s0 = gmres(A, b, rel_tol=1e-10)
    x1, s1 = gmres(A, b, ilu0_factor(A).as_operator(), rel_tol=1e-10)
    assert s0.converged and s1.converged
    assert s1.iterations < s0.iterations
    exact = np.linalg.solve(A.toarray(), b)
    np.testing.assert_allclose(x1, exact, rtol=1e-7, atol=1e-9)


def test_gmres_true_residual_and_history():
    A = poisson2d(12) + sp.diags(np.linspace(0, 1, 144))
    b = np.random.default_rng(4).standard_normal(144)
    x, stats = gmres(A, b, rel_tol=1e-9, restart=30, keep_history=True)
    assert stats.converged
    assert np.linalg.norm(b - A @ x) <= 1e-9 * np.linalg.norm(b)
    hist = np.array(stats.residual_history)
    assert np.all(np.diff(hist[: min(31, len(hist))]) <= 1e-12)


def test_gmres_reports_failure_with_best_iterate():
    A = poisson2d(16)
    b = np.ones(A.shape[0])
    x, stats = gmres(A, b, rel_tol=1e-12, max_iters=5)
    assert not stats.converged and stats.iterations == 5
    assert stats.final_relative_residual < 1.0
    assert np.linalg.norm(b - A @ x) / np.linalg.norm(b) == pytest.approx(stats.final_relative_residual)


def test_gmres_zero_rhs_and_bad_args():
    x, stats = gmres(sp.identity(4, format="csr"), np.zeros(4))
    assert stats.converged and stats.iterations == 0 and not x.any()
    with pytest.raises(ValueError):
        gmres(sp.identity(4, format="csr"), np.ones(4), rel_tol=0.0)
    with pytest.raises(DimensionError):
        gmres(sp.identity(4, format="csr"), np.ones(3))


@given(st.integers(0, 10_000))
def test_right_preconditioning_meets_true_tolerance(seed):
    rng = np.random.default_rng(seed)
    n = 30
    A = sp.csr_matrix(np.eye(n) * 4 + rng.standard_normal((n, n)) * 0.3)
    M = sp.diags(rng.uniform(0.5, 2.0, n)).tocsr()
    b = rng.standard_normal(n)
    x, stats = gmres(A, b, M, rel_tol=1e-10)
    assert stats.converged
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b) * (1 + 1e-6)


def test_spectrum_examples():
    np.testing.assert_allclose(np.sort(dense_spectrum(np.diag([1.0, 2, 3, 4, 5])).real), [1, 2, 3, 4, 5],
                               atol=1e-10)
    rot = dense_spectrum(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(sorted(rot.imag), [-1, 1], atol=1e-10)
    np.testing.assert_allclose(rot.real, 0, atol=1e-10)
    companion = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    vals = dense_spectrum(companion)
    np.testing.assert_allclose(vals ** 3, 1.0, atol=1e-10)
    np.testing.assert_allclose(sorted(np.angle(vals)), [-2 * np.pi / 3, 0, 2 * np.pi / 3], atol=1e-10)


def test_spectrum_of_exactly_preconditioned_operator_is_one():
    A = poisson2d(6) + sp.random(36, 36, density=0.05, random_state=1)
    lu = np.linalg.inv(A.toarray())
    op = LinearOperator(A.shape, matvec=lambda v: A @ (lu @ v), dtype=float)
    np.testing.assert_allclose(dense_spectrum(op), 1.0, atol=1e-8)


def test_spectrum_size_cap():
    with pytest.raises(SpectrumError):
        dense_spectrum(sp.identity(30, format="csr"), max_n=20)


def test_matrix_market_round_trip(tmp_path):
    A = poisson2d(5)
    write_matrix_market(tmp_path / "a.mtx", A)
    assert (read_matrix_market(tmp_path / "a.mtx") != A).nnz == 0
