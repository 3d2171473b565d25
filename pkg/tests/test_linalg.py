import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, settings
from hypothesis import strategies as st

from transbem.linalg import MassSolver, NotSPDError, condition_number, eigenvalues, gmres, mass_solve


def test_gmres_identity(rng):
    b = rng.normal(size=30) + 1j * rng.normal(size=30)
    rep = gmres(lambda x: x, b)
    assert rep.converged and rep.iterations == 1
    assert rep.residual < 1e-14
    assert np.allclose(rep.x, b)


def test_gmres_two_eigenvalues(rng):
    d = np.where(np.arange(40) % 2, 2.0, -1.0 + 0.5j)
    b = rng.normal(size=40) + 0j
    rep = gmres(lambda x: d * x, b)
    assert rep.converged and rep.iterations <= 2
    assert np.allclose(d * rep.x, b)


def test_gmres_zero_rhs():
    rep = gmres(lambda x: 2 * x, np.zeros(5))
    assert rep.iterations == 0 and rep.converged
    assert np.array_equal(rep.x, np.zeros(5))


def test_gmres_random_against_direct(rng):
    n = 50
    A = np.eye(n) * 4 + (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    rep = gmres(lambda x: A @ x, b, tol=1e-10)
    ref = np.linalg.solve(A, b)
    assert np.linalg.norm(rep.x - ref) / np.linalg.norm(ref) <= 1e-6
    assert np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b) <= 1e-10 * 1.001


def test_gmres_history_monotone_and_true_residual(rng):
    n = 60
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) + 8 * np.eye(n)
    b = rng.normal(size=n) + 0j
    rep = gmres(lambda x: A @ x, b)
    h = np.asarray(rep.history)
    assert h[0] == 1.0 and np.all(np.diff(h) <= 1e-15)
    assert np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b) == pytest.approx(rep.residual, rel=1e-4)


def test_gmres_max_iter_not_converged(rng):
    n = 40
    A = np.diag(np.linspace(1, 100, n)) + 0j
    b = rng.normal(size=n) + 0j
    rep = gmres(lambda x: A @ x, b, tol=1e-12, max_iter=3)
    assert not rep.converged and rep.iterations == 3
    assert rep.residual == pytest.approx(np.linalg.norm(b - A @ rep.x) / np.linalg.norm(b), rel=1e-10)


def test_gmres_callback(rng):
    seen = []
    gmres(lambda x: 3 * x, rng.normal(size=4) + 0j, callback=lambda j, r: seen.append(j))
    assert seen == [1]


def test_eigenvalues_diagonal():
    d = np.array([3.0, -1.0, 2.5 + 1j, 0.0])
    assert np.allclose(np.sort_complex(eigenvalues(np.diag(d))), np.sort_complex(d), atol=1e-12)


def test_eigenvalues_companion():
    ev = eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(np.sort(ev.real), [-1, 1]) and np.allclose(ev.imag, 0)


def test_eigenvalue_trace(rng):
    A = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    assert eigenvalues(A).sum() == pytest.approx(np.trace(A), rel=1e-9)


def test_eigenvalues_permutation_invariant(rng):
    A = rng.normal(size=(15, 15)) + 1j * rng.normal(size=(15, 15))
    P = np.eye(15)[rng.permutation(15)]
    a = np.sort_complex(eigenvalues(A))
    b = np.sort_complex(eigenvalues(P.T @ A @ P))
    assert np.allclose(a, b, atol=1e-10)


def test_eigenvalues_rejects_nonsquare():
    with pytest.raises(ValueError):
        eigenvalues(np.ones((2, 3)))
    with pytest.raises(ValueError):
        condition_number(np.ones((2, 3)))


def test_condition_simple():
    assert condition_number(np.eye(4)) == pytest.approx(1.0)
    assert condition_number(np.diag([10.0, 0.1])) == pytest.approx(100.0)
    assert condition_number(np.zeros((3, 3))) == float("inf")


def test_condition_constructed_svd(rng):
    Q1, _ = np.linalg.qr(rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    Q2, _ = np.linalg.qr(rng.normal(size=(12, 12)))
    s = np.logspace(0, 5, 12)
    assert condition_number(Q1 @ np.diag(s) @ Q2) == pytest.approx(1e5, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(alpha_re=st.floats(-1e3, 1e3), alpha_im=st.floats(-1e3, 1e3))
def test_condition_scale_invariant(alpha_re, alpha_im):
    alpha = complex(alpha_re, alpha_im)
    if abs(alpha) < 1e-3:
        return
    A = np.random.default_rng(7).normal(size=(10, 10))
    assert condition_number(alpha * A) == pytest.approx(condition_number(A), rel=1e-12)


def test_mass_solve_round_trip(space2):
    b = np.random.default_rng(3).normal(size=space2.n) + 1j
    x = space2.mass_solver.solve(b)
    assert np.linalg.norm(space2.mass @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_mass_solve_identity():
    b = np.arange(5.0)
    assert np.allclose(mass_solve(scipy.sparse.eye(5), b), b, rtol=1e-15)


def test_mass_solve_against_dense(rng):
    B = rng.normal(size=(100, 100))
    M = B @ B.T + 100 * np.eye(100)
    rhs = rng.normal(size=(100, 3))
    sol = MassSolver(scipy.sparse.csr_matrix(M)).solve(rhs)
    assert np.allclose(sol, np.linalg.solve(M, rhs), rtol=1e-11, atol=0)


def test_mass_solve_not_spd():
    with pytest.raises(NotSPDError):
        MassSolver(scipy.sparse.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]])))
    with pytest.raises(NotSPDError):
        MassSolver(scipy.sparse.csr_matrix(np.array([[1.0, 0.5], [0.0, 1.0]])))
