"""Galerkin assembly of Helmholtz boundary operators on P1 spaces.

All four operators use the kernel ``G(x, y) = exp(ik|x-y|) / (4 pi |x-y|)``:

* ``V`` single layer, ``K`` double layer (normal derivative at the source),
* ``T`` adjoint double layer, obtained as the transpose of ``K`` on the
  swapped space pair,
* ``D`` hypersingular, in the integrated-by-parts form
  ``<D u, v> = int int G (curl u . curl v - k^2 (n_x . n_y) u v)``.

Weak identities are discretised by the P1 mass matrix.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse

from . import _kernels
from .linalg import MassSolver
from .mesh import SurfaceMesh
from .quadrature import COINCIDENT, EDGE, VERTEX, QuadratureRule

log = logging.getLogger(__name__)

KINDS = ("V", "K", "T", "D", "Mass")


class QuadratureDegeneracyError(ValueError):
    pass


def greens_kernel(x, y, k):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0.0):
        raise ZeroDivisionError("Green's function is singular at x == y")
    return np.exp(1j * k * r) / (4.0 * np.pi * r)


class P1Space:
    """Continuous piecewise-linear functions, one hat function per vertex."""

    def __init__(self, mesh: SurfaceMesh):
        self.mesh = mesh

    @property
    def n(self) -> int:
        return self.mesh.n_vertices

    @cached_property
    def curls(self) -> np.ndarray:
        """Surface curls of the three local hat functions, shape (T, 3, 3)."""
        p = self.mesh.vertices[self.mesh.triangles]
        two_a = 2.0 * self.mesh.areas[:, None]
        c = np.empty_like(p)
        for i in range(3):
            c[:, i] = (p[:, (i + 1) % 3] - p[:, (i + 2) % 3]) / two_a
        return c

    @cached_property
    def mass(self) -> scipy.sparse.csr_matrix:
        t = self.mesh.triangles
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        vals = (self.mesh.areas[:, None, None] * local[None]).ravel()
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def mass_solver(self) -> MassSolver:
        return MassSolver(self.mass)

    def evaluate(self, coeffs, tri, bary):
        return np.asarray(coeffs)[self.mesh.triangles[tri]] @ np.asarray(bary)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    kind: str
    k: float | None
    domain: P1Space
    range: P1Space
    entries: object

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, x):
        return self.entries @ x


class Assembler:
    """Assembles and caches dense ``V``, ``K``, ``D`` blocks per
    (range mesh, domain mesh, wavenumber).

    One compiled pass produces all three matrices of a block;
    ``dense_assemblies`` counts those passes.
    """

    def __init__(self, rule: QuadratureRule | None = None):
        self.rule = rule or QuadratureRule.default()
        self._cache = {}
        self.dense_assemblies = 0
        self.seconds = 0.0
        xs, ys, ws, off = [], [], [], [0]
        for rel in (COINCIDENT, EDGE, VERTEX):
            x, y, w = self.rule.singular(rel)
            xs.append(x)
            ys.append(y)
            ws.append(w)
            off.append(off[-1] + len(w))
        self._ss = (np.concatenate(xs), np.concatenate(ys), np.concatenate(ws), np.array(off, np.int64))

    def _block(self, k, domain: P1Space, range_: P1Space):
        key = (id(range_.mesh), id(domain.mesh), float(k))
        hit = self._cache.get(key)
        if hit is not None:
            return hit[0]
        same = range_.mesh is domain.mesh
        mx, my = range_.mesh, domain.mesh
        if np.any(mx.areas <= 0) or np.any(my.areas <= 0):
            raise QuadratureDegeneracyError("zero-area triangle in assembly")
        shape = (range_.n, domain.n)
        V = np.zeros(shape, np.complex128)
        K = np.zeros(shape, np.complex128)
        D = np.zeros(shape, np.complex128)
        t0 = time.perf_counter()
        _kernels.assemble_vkd(
            mx.vertices, mx.triangles, mx.normals, mx.areas, range_.curls,
            my.vertices, my.triangles, my.normals, my.areas, domain.curls,
            float(k), same, self.rule.regular_points, self.rule.regular_weights,
            *self._ss, V, K, D,
        )
        dt = time.perf_counter() - t0
        self.seconds += dt
        self.dense_assemblies += 1
        log.debug("assembled %dx%d block at k=%g in %.2fs", shape[0], shape[1], k, dt)
        out = {"V": V, "K": K, "D": D}
        # keep the spaces alive so their ids stay unique while cached
        self._cache[key] = (out, range_, domain)
        return out

    def operator(self, kind, k, domain: P1Space, range_: P1Space) -> OperatorMatrix:
        if kind == "Mass":
            if range_ is not domain:
                raise ValueError("mass matrix needs identical domain and range")
            return OperatorMatrix("Mass", None, domain, range_, domain.mass)
        if kind == "T":
            entries = self._block(k, range_, domain)["K"].T
        elif kind in ("V", "K", "D"):
            entries = self._block(k, domain, range_)[kind]
        else:
            raise ValueError(f"unknown operator kind {kind!r}")
        return OperatorMatrix(kind, float(k), domain, range_, entries)

    def clear(self):
        self._cache.clear()


def assemble(kind, k, domain_space, range_space, rule=None, assembler=None) -> OperatorMatrix:
    return (assembler or Assembler(rule)).operator(kind, k, domain_space, range_space)


def strong_form(A, M):
    """Dense ``M^{-1} A`` for an operator and the mass matrix of its range."""
    solver = M.domain.mass_solver if isinstance(M, OperatorMatrix) else MassSolver(M)
    entries = A.entries if isinstance(A, OperatorMatrix) else A
    if scipy.sparse.issparse(entries):
        entries = entries.toarray()
    return solver.solve(np.asarray(entries))


def dump_matrix(op: OperatorMatrix, path):
    """Write a JSON header line followed by row-major complex128 entries."""
    entries = op.entries.toarray() if scipy.sparse.issparse(op.entries) else np.asarray(op.entries)
    entries = np.ascontiguousarray(entries, dtype=np.complex128)
    header = {"kind": op.kind, "k": op.k, "N": list(entries.shape), "dtype": "complex128", "order": "C"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(entries.tobytes())


def load_matrix(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        data = np.frombuffer(fh.read(), dtype=np.complex128)
    return header, data.reshape(header["N"])
