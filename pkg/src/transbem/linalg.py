"""Dense complex linear algebra: GMRES, spectra, condition numbers, mass solves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

log = logging.getLogger(__name__)


class NotSPDError(np.linalg.LinAlgError):
    pass


@dataclass
class GmresReport:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list)


def gmres(apply, b, tol=1e-7, max_iter=None, callback=None) -> GmresReport:
    """Full (non-restarted) GMRES with modified Gram-Schmidt and a zero
    initial guess.

    One iteration is one Arnoldi step, i.e. one call to ``apply``.  The
    residual history holds ``||b - A x_j|| / ||b||`` for ``j = 0..iterations``
    as estimated by the Givens-rotated least-squares problem.
    """
    b = np.asarray(b, dtype=np.complex128)
    n = b.shape[0]
    beta = np.linalg.norm(b)
    if beta == 0.0:
        return GmresReport(np.zeros(n, np.complex128), 0, 0.0, True, [0.0])
    if max_iter is None:
        max_iter = n
    max_iter = min(max_iter, n)

    Q = np.zeros((max_iter + 1, n), np.complex128)
    H = np.zeros((max_iter + 1, max_iter), np.complex128)
    cs = np.zeros(max_iter, np.complex128)
    sn = np.zeros(max_iter, np.complex128)
    g = np.zeros(max_iter + 1, np.complex128)
    g[0] = beta
    Q[0] = b / beta
    history = [1.0]
    converged = False
    j = 0
    for j in range(max_iter):
        w = np.asarray(apply(Q[j]), dtype=np.complex128)
        for i in range(j + 1):
            H[i, j] = np.vdot(Q[i], w)
            w = w - H[i, j] * Q[i]
        h_next = np.linalg.norm(w)
        H[j + 1, j] = h_next
        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + np.conj(cs[i]) * H[i + 1, j]
            H[i, j] = t
        cs[j], sn[j], rr = _givens(H[j, j], H[j + 1, j])
        H[j, j] = rr
        H[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]
        res = abs(g[j + 1]) / beta
        history.append(float(res))
        if callback is not None:
            callback(j + 1, res)
        breakdown = h_next <= 1e-14 * beta
        if res <= tol or breakdown:
            converged = bool(res <= tol or breakdown)
            break
        Q[j + 1] = w / h_next
    m = j + 1
    y = scipy.linalg.solve_triangular(H[:m, :m], g[:m])
    x = Q[:m].T @ y
    final = float(np.linalg.norm(b - np.asarray(apply(x))) / beta) if not converged else history[-1]
    if not converged:
        log.warning("GMRES stopped after %d iterations at relative residual %.3e", m, final)
    return GmresReport(x, m, history[-1] if converged else final, converged, history)


def _givens(a, b):
    if b == 0:
        return 1.0 + 0j, 0.0 + 0j, a
    if a == 0:
        return 0.0 + 0j, 1.0 + 0j, b
    r = np.hypot(abs(a), abs(b))
    c = abs(a) / r
    s = (a / abs(a)) * np.conj(b) / r
    return c + 0j, s, (a / abs(a)) * r


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a dense square matrix (LAPACK Hessenberg-QR)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return scipy.linalg.eigvals(A, check_finite=True, overwrite_a=False)


def condition_number(A) -> float:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    s = scipy.linalg.svdvals(A)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


class MassSolver:
    """Cached Cholesky factorization of a sparse SPD mass matrix."""

    def __init__(self, M):
        self.M = scipy.sparse.csr_matrix(M)
        dense = self.M.toarray()
        if not np.allclose(dense, dense.T, rtol=0, atol=1e-14 * np.abs(dense).max()):
            raise NotSPDError("mass matrix is not symmetric")
        try:
            self._factor = scipy.linalg.cho_factor(dense, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotSPDError("mass matrix is not positive definite") from exc

    def solve(self, B):
        B = np.asarray(B)
        if np.iscomplexobj(B):
            return scipy.linalg.cho_solve(self._factor, B.real) + 1j * scipy.linalg.cho_solve(self._factor, B.imag)
        return scipy.linalg.cho_solve(self._factor, B)


def mass_solve(M, B):
    if isinstance(M, MassSolver):
        return M.solve(B)
    return MassSolver(M).solve(B)
