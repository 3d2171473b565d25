"""Boundary integral formulations of the acoustic transmission problem.

Every formulation is kept as an operator expression tree so that a system
application costs exactly the dense matrix-vector products of its leaves.
Identity blocks become P1 mass matrices and each composition ``A o B``
inserts the inverse mass matrix of the joint space, ``A M^{-1} B``.

Unknowns per object ``m`` (all exterior traces of the total field):

* ``HighContrastNeumann``: ``(gamma_N p_tot, psi)``, scattered field ``V psi``
* ``HighContrastDirichlet``: ``(phi, gamma_D p_tot)``, scattered field ``-K phi``
* ``PMCHWT``, ``Muller``, ``CalderonPMCHWT``: ``(gamma_D p_tot, gamma_N p_tot)``

For the three direct formulations the multiple-scattering coupling between
objects ``m != n`` is the exterior Calderon block ``[[-K_mn, V_mn], [D_mn, T_mn]]``.
This mirrors the high-contrast block pattern and is a convention of this
package.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .assembly import Assembler, P1Space
from .fields import PlaneWave, incident_traces
from .linalg import gmres
from .materials import Material, MediumPair

log = logging.getLogger(__name__)


class FormulationKind(enum.Enum):
    HIGH_CONTRAST_NEUMANN = "HighContrastNeumann"
    HIGH_CONTRAST_DIRICHLET = "HighContrastDirichlet"
    PMCHWT = "PMCHWT"
    MULLER = "Muller"
    CALDERON_PMCHWT = "CalderonPMCHWT"

    @property
    def is_high_contrast(self) -> bool:
        return self in (FormulationKind.HIGH_CONTRAST_NEUMANN, FormulationKind.HIGH_CONTRAST_DIRICHLET)

    @classmethod
    def parse(cls, name) -> "FormulationKind":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").replace(" ", "").lower()
        for kind in cls:
            if key == kind.value.lower():
                return kind
        if key in _ALIASES:
            return _ALIASES[key]
        raise ValueError(f"unknown formulation {name!r}; choose from {[k.value for k in cls]}")


_ALIASES = {
    "hcn": FormulationKind.HIGH_CONTRAST_NEUMANN,
    "hcd": FormulationKind.HIGH_CONTRAST_DIRICHLET,
    "mueller": FormulationKind.MULLER,
    "calderon": FormulationKind.CALDERON_PMCHWT,
    "cpmchwt": FormulationKind.CALDERON_PMCHWT,
}

ALL_KINDS = tuple(FormulationKind)

UNKNOWN_LABELS = {
    FormulationKind.HIGH_CONTRAST_NEUMANN: ("gamma_N p_tot", "psi"),
    FormulationKind.HIGH_CONTRAST_DIRICHLET: ("phi", "gamma_D p_tot"),
    FormulationKind.PMCHWT: ("gamma_D p_tot", "gamma_N p_tot"),
    FormulationKind.MULLER: ("gamma_D p_tot", "gamma_N p_tot"),
    FormulationKind.CALDERON_PMCHWT: ("gamma_D p_tot", "gamma_N p_tot"),
}


class GeometryOverlapError(ValueError):
    pass


# ---------------------------------------------------------------- expressions

class MatvecCounter:
    """Counts dense leaf applications (mass matrices and mass solves are free)."""

    def __init__(self):
        self.dense = 0

    def reset(self):
        self.dense = 0


class Expr:
    range_space: P1Space
    domain_space: P1Space

    @property
    def shape(self):
        return (self.range_space.n, self.domain_space.n)

    def apply(self, x, counter=None):
        raise NotImplementedError

    def dense(self):
        raise NotImplementedError

    def leaves(self):
        return iter(())

    def __add__(self, other):
        return Sum([self, other])

    def __sub__(self, other):
        return Sum([self, Scaled(-1.0, other)])

    def __rmul__(self, alpha):
        return Scaled(alpha, self)

    def __neg__(self):
        return Scaled(-1.0, self)

    def __matmul__(self, other):
        return Product(self, other)


class Leaf(Expr):
    """A dense assembled operator, labelled by ``key = (kind, medium, m, n)``."""

    def __init__(self, op, key):
        self.op = op
        self.key = key
        self.range_space = op.range
        self.domain_space = op.domain

    def apply(self, x, counter=None):
        if counter is not None:
            counter.dense += 1
        return self.op.entries @ x

    def dense(self):
        return np.asarray(self.op.entries)

    def leaves(self):
        yield self

    def __repr__(self):
        return f"Leaf({self.key})"


class Mass(Expr):
    def __init__(self, space: P1Space):
        self.range_space = self.domain_space = space

    def apply(self, x, counter=None):
        return self.range_space.mass @ x

    def dense(self):
        return self.range_space.mass.toarray().astype(complex)


class Scaled(Expr):
    def __init__(self, alpha, expr):
        self.alpha = alpha
        self.expr = expr
        self.range_space = expr.range_space
        self.domain_space = expr.domain_space

    def apply(self, x, counter=None):
        return self.alpha * self.expr.apply(x, counter)

    def dense(self):
        return self.alpha * self.expr.dense()

    def leaves(self):
        return self.expr.leaves()


class Sum(Expr):
    def __init__(self, terms):
        terms = list(terms)
        first = terms[0]
        for t in terms[1:]:
            if t.shape != first.shape:
                raise ValueError(f"cannot add blocks of shape {first.shape} and {t.shape}")
        self.terms = terms
        self.range_space = first.range_space
        self.domain_space = first.domain_space

    def apply(self, x, counter=None):
        out = self.terms[0].apply(x, counter)
        for t in self.terms[1:]:
            out = out + t.apply(x, counter)
        return out

    def dense(self):
        out = self.terms[0].dense()
        for t in self.terms[1:]:
            out = out + t.dense()
        return out

    def leaves(self):
        for t in self.terms:
            yield from t.leaves()


class Product(Expr):
    """``left M^{-1} right`` with the mass matrix of the joint space."""

    def __init__(self, left, right):
        if left.domain_space is not right.range_space:
            raise ValueError("composition joint spaces differ")
        self.left = left
        self.right = right
        self.range_space = left.range_space
        self.domain_space = right.domain_space

    def apply(self, x, counter=None):
        y = self.right.apply(x, counter)
        return self.left.apply(self.right.range_space.mass_solver.solve(y), counter)

    def dense(self):
        return self.left.dense() @ self.right.range_space.mass_solver.solve(self.right.dense())

    def leaves(self):
        yield from self.left.leaves()
        yield from self.right.leaves()


class Block:
    """A square block arrangement with ``None`` for zero blocks."""

    def __init__(self, blocks, spaces):
        self.blocks = blocks
        self.spaces = list(spaces)
        nb = len(self.spaces)
        if len(blocks) != nb or any(len(row) != nb for row in blocks):
            raise ValueError("block grid must be square and match the space list")
        for i, row in enumerate(blocks):
            for j, b in enumerate(row):
                if b is None:
                    continue
                if b.range_space is not self.spaces[i] or b.domain_space is not self.spaces[j]:
                    raise ValueError(f"block ({i}, {j}) is not conformable")
        self.offsets = np.concatenate([[0], np.cumsum([s.n for s in self.spaces])])

    @property
    def n(self):
        return int(self.offsets[-1])

    @property
    def shape(self):
        return (self.n, self.n)

    def split(self, x):
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.spaces))]

    def apply(self, x, counter=None):
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        parts = self.split(x)
        out = np.zeros(self.n, np.complex128)
        for i, row in enumerate(self.blocks):
            acc = out[self.offsets[i]:self.offsets[i + 1]]
            for j, b in enumerate(row):
                if b is not None:
                    acc += b.apply(parts[j], counter)
        return out

    def dense(self):
        out = np.zeros(self.shape, np.complex128)
        for i, row in enumerate(self.blocks):
            for j, b in enumerate(row):
                if b is not None:
                    out[self.offsets[i]:self.offsets[i + 1], self.offsets[j]:self.offsets[j + 1]] = b.dense()
        return out

    def mass_solve(self, y):
        """Block-diagonal inverse mass matrix applied to ``y`` (rows or matrix)."""
        y = np.asarray(y)
        out = np.empty_like(y, dtype=np.complex128)
        for i, s in enumerate(self.spaces):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            out[sl] = s.mass_solver.solve(y[sl])
        return out

    def mass_apply(self, y):
        out = np.empty(self.n, np.complex128)
        for i, s in enumerate(self.spaces):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            out[sl] = s.mass @ y[sl]
        return out

    def leaves(self):
        for row in self.blocks:
            for b in row:
                if b is not None:
                    yield from b.leaves()


class SquaredBlock:
    """``P M^{-1} P`` for a block operator ``P``, the Calderon-multiplied system."""

    def __init__(self, inner: Block):
        self.inner = inner
        self.spaces = inner.spaces
        self.offsets = inner.offsets

    n = property(lambda self: self.inner.n)
    shape = property(lambda self: self.inner.shape)

    def split(self, x):
        return self.inner.split(x)

    def apply(self, x, counter=None):
        return self.inner.apply(self.inner.mass_solve(self.inner.apply(x, counter)), counter)

    def dense(self):
        P = self.inner.dense()
        return P @ self.inner.mass_solve(P)

    mass_solve = property(lambda self: self.inner.mass_solve)
    mass_apply = property(lambda self: self.inner.mass_apply)

    def leaves(self):
        yield from self.inner.leaves()
        yield from self.inner.leaves()


# ---------------------------------------------------------------- systems

@dataclass
class ObjectTraces:
    dirichlet: np.ndarray
    neumann: np.ndarray
    auxiliary: np.ndarray | None = None


@dataclass
class SolutionTraces:
    kind: FormulationKind
    objects: list

    @property
    def representation(self):
        if self.kind is FormulationKind.HIGH_CONTRAST_NEUMANN:
            return "single"
        if self.kind is FormulationKind.HIGH_CONTRAST_DIRICHLET:
            return "double"
        return "direct"


@dataclass(eq=False)
class FormulationSystem:
    kind: FormulationKind
    expression: object
    rhs: np.ndarray
    unknowns: tuple
    exterior: Material
    interiors: list
    frequency: float
    meshes: list
    spaces: list
    wave: PlaneWave
    incident: list
    leaves_by_key: dict
    assembler: Assembler
    counter: MatvecCounter = field(default_factory=MatvecCounter)

    @property
    def n_objects(self) -> int:
        return len(self.meshes)

    @property
    def dimension(self) -> int:
        return self.expression.n

    @property
    def k_exterior(self) -> float:
        return self.exterior.wavenumber(self.frequency)

    @property
    def k_interiors(self) -> list:
        return [m.wavenumber(self.frequency) for m in self.interiors]

    @property
    def density_ratios(self) -> list:
        return [m.rho / self.exterior.rho for m in self.interiors]

    @property
    def pair(self) -> MediumPair:
        if self.n_objects != 1:
            raise ValueError("system has several interior media")
        return MediumPair(self.exterior, self.interiors[0], self.frequency)

    def operator_count(self) -> int:
        """Distinct boundary operators appearing in the expression."""
        return len({leaf.key for leaf in self.expression.leaves()})

    def dense_assembly_count(self) -> int:
        """Distinct dense matrices that must be assembled, with ``T`` taken
        as the transpose of ``K`` on the swapped mesh pair."""
        need = set()
        for leaf in self.expression.leaves():
            kind, medium, m, n = leaf.key
            if kind == "T":
                need.add(("K", medium, n, m))
            else:
                need.add(leaf.key)
        return len(need)

    def matvecs_per_apply(self) -> int:
        return sum(1 for _ in self.expression.leaves())

    def strong_rhs(self):
        return self.expression.mass_solve(self.rhs)

    def strong_dense(self):
        """Dense ``M^{-1} A`` (analysis paths only)."""
        return self.expression.mass_solve(self.expression.dense())

    def weak_dense(self):
        return self.expression.dense()


def apply(system: FormulationSystem, x):
    """Weak-form system application; counts dense leaf products."""
    return system.expression.apply(np.asarray(x, dtype=np.complex128), system.counter)


def strong_apply(system: FormulationSystem, x):
    return system.expression.mass_solve(apply(system, x))


def _check_disjoint(meshes, tol=1e-10):
    for a in range(len(meshes)):
        for b in range(a + 1, len(meshes)):
            lo_a, hi_a = meshes[a].bounding_box()
            lo_b, hi_b = meshes[b].bounding_box()
            if np.any(hi_a < lo_b) or np.any(hi_b < lo_a):
                continue
            for p, q in ((meshes[a], meshes[b]), (meshes[b], meshes[a])):
                dist, _ = _kernels.point_triangle_distance(p.vertices, q.vertices, q.triangles)
                wind = _kernels.solid_angle_sum(p.vertices, q.vertices, q.triangles)
                if dist.min() <= tol * max(q.h, 1.0) or np.any(wind > 0.5):
                    raise GeometryOverlapError(f"surfaces {a} and {b} intersect or are nested")


class _Builder:
    def __init__(self, exterior, interiors, meshes, frequency, assembler):
        self.exterior = exterior
        self.interiors = interiors
        self.f = frequency
        self.spaces = [P1Space(m) for m in meshes]
        self.asm = assembler
        self.k0 = exterior.wavenumber(frequency)
        self.leaves = {}

    def op(self, kind, medium, m, n):
        key = (kind, medium, m, n)
        leaf = self.leaves.get(key)
        if leaf is None:
            if medium == "int":
                if m != n:
                    raise ValueError("interior operators act on a single surface")
                k = self.interiors[m].wavenumber(self.f)
            else:
                k = self.k0
            leaf = Leaf(self.asm.operator(kind, k, self.spaces[n], self.spaces[m]), key)
            self.leaves[key] = leaf
        return leaf

    def ext(self, kind, m, n):
        return self.op(kind, "ext", m, n)

    def int_(self, kind, m):
        return self.op(kind, "int", m, m)

    def mass(self, m):
        return Mass(self.spaces[m])


def _blocks_hc_neumann(b: _Builder, m, n, ratio, M):
    # ratio = rho_m / rho_0
    if m == n:
        return [[0.5 * M - b.int_("T", m), (-1.0 / ratio) * Product(b.int_("D", m), b.ext("V", m, m))],
                [M, 0.5 * M - b.ext("T", m, m)]]
    return [[None, (-1.0 / ratio) * Product(b.int_("D", m), b.ext("V", m, n))],
            [None, -b.ext("T", m, n)]]


def _blocks_hc_dirichlet(b: _Builder, m, n, ratio, M):
    if m == n:
        return [[0.5 * M + b.ext("K", m, m), M],
                [(-ratio) * Product(b.int_("V", m), b.ext("D", m, m)), 0.5 * M + b.int_("K", m)]]
    return [[b.ext("K", m, n), None],
            [(-ratio) * Product(b.int_("V", m), b.ext("D", m, n)), None]]


def _blocks_pmchwt(b: _Builder, m, n, ratio, M):
    if m == n:
        return [[-b.ext("K", m, m) - b.int_("K", m), b.ext("V", m, m) + ratio * b.int_("V", m)],
                [b.ext("D", m, m) + (1.0 / ratio) * b.int_("D", m), b.ext("T", m, m) + b.int_("T", m)]]
    return _coupling(b, m, n)


def _blocks_muller(b: _Builder, m, n, ratio, M):
    if m == n:
        return [[M - b.ext("K", m, m) + b.int_("K", m), b.ext("V", m, m) - ratio * b.int_("V", m)],
                [b.ext("D", m, m) - (1.0 / ratio) * b.int_("D", m), M + b.ext("T", m, m) - b.int_("T", m)]]
    return _coupling(b, m, n)


def _coupling(b: _Builder, m, n):
    return [[-b.ext("K", m, n), b.ext("V", m, n)],
            [b.ext("D", m, n), b.ext("T", m, n)]]


_BLOCKS = {
    FormulationKind.HIGH_CONTRAST_NEUMANN: _blocks_hc_neumann,
    FormulationKind.HIGH_CONTRAST_DIRICHLET: _blocks_hc_dirichlet,
    FormulationKind.PMCHWT: _blocks_pmchwt,
    FormulationKind.MULLER: _blocks_muller,
    FormulationKind.CALDERON_PMCHWT: _blocks_pmchwt,
}


def build_multiple(kind, exterior: Material, interiors, meshes, f, wave: PlaneWave | None = None,
                   assembler: Assembler | None = None) -> FormulationSystem:
    """Block system for ``len(meshes)`` disjoint penetrable objects.

    Object ``m`` owns block rows ``2m, 2m+1``; the incident wave defaults to
    unit amplitude along ``(1,1,1)/sqrt(3)`` in the exterior medium.
    """
    kind = FormulationKind.parse(kind)
    interiors = list(interiors)
    meshes = list(meshes)
    if len(interiors) != len(meshes) or not meshes:
        raise ValueError("need one interior material per mesh")
    _check_disjoint(meshes)
    assembler = assembler or Assembler()
    b = _Builder(exterior, interiors, meshes, f, assembler)
    wave = wave or PlaneWave(b.k0)
    ell = len(meshes)
    grid = [[None] * (2 * ell) for _ in range(2 * ell)]
    spaces = []
    for m in range(ell):
        spaces += [b.spaces[m], b.spaces[m]]
    rhs = np.zeros(sum(2 * s.n for s in b.spaces), np.complex128)
    incident = []
    off = 0
    for m in range(ell):
        ratio = interiors[m].rho / exterior.rho
        M = b.mass(m)
        for n in range(ell):
            blk = _BLOCKS[kind](b, m, n, ratio, M)
            for i in range(2):
                for j in range(2):
                    grid[2 * m + i][2 * n + j] = blk[i][j]
        gd, gn = incident_traces(wave, meshes[m])
        incident.append((gd, gn))
        N = b.spaces[m].n
        mass = b.spaces[m].mass
        if kind is FormulationKind.HIGH_CONTRAST_NEUMANN:
            r1 = (1.0 / ratio) * (b.int_("D", m).op.entries @ gd)
            r2 = mass @ gn
        elif kind is FormulationKind.HIGH_CONTRAST_DIRICHLET:
            r1 = mass @ gd
            r2 = ratio * (b.int_("V", m).op.entries @ gn)
        else:
            r1, r2 = mass @ gd, mass @ gn
        rhs[off:off + N] = r1
        rhs[off + N:off + 2 * N] = r2
        off += 2 * N
    expression = Block(grid, spaces)
    if kind is FormulationKind.CALDERON_PMCHWT:
        # P M^{-1} P x = P M^{-1} (M g)
        rhs = expression.apply(expression.mass_solve(rhs))
        expression = SquaredBlock(expression)
    return FormulationSystem(
        kind=kind, expression=expression, rhs=rhs, unknowns=UNKNOWN_LABELS[kind],
        exterior=exterior, interiors=interiors, frequency=f, meshes=meshes, spaces=b.spaces,
        wave=wave, incident=incident, leaves_by_key=b.leaves, assembler=assembler,
    )


def build(kind, pair: MediumPair, mesh, wave: PlaneWave | None = None,
          assembler: Assembler | None = None) -> FormulationSystem:
    return build_multiple(kind, pair.exterior, [pair.interior], [mesh], pair.frequency, wave, assembler)


# ---------------------------------------------------------------- solve

def solve(system: FormulationSystem, tol=1e-7, max_iter=None):
    """GMRES on the strong form ``M^{-1} A x = M^{-1} b``.

    Returns the :class:`~transbem.linalg.GmresReport` and the recovered traces.
    """
    report = gmres(lambda x: strong_apply(system, x), system.strong_rhs(), tol=tol, max_iter=max_iter)
    return report, recover_traces(system, report.x)


def recover_traces(system: FormulationSystem, x) -> SolutionTraces:
    """Exterior total-field traces per object from a solution vector."""
    x = np.asarray(x, np.complex128)
    if x.shape != (system.dimension,):
        raise ValueError(f"solution length {x.shape} does not match system dimension {system.dimension}")
    parts = system.expression.split(x)
    ell = system.n_objects
    first = [parts[2 * m] for m in range(ell)]
    second = [parts[2 * m + 1] for m in range(ell)]
    kind = system.kind
    out = []
    for m in range(ell):
        gd, gn = system.incident[m]
        solver = system.spaces[m].mass_solver
        if kind is FormulationKind.HIGH_CONTRAST_NEUMANN:
            acc = sum(system.leaves_by_key[("V", "ext", m, n)].op.entries @ second[n] for n in range(ell))
            out.append(ObjectTraces(solver.solve(acc) + gd, first[m], second[m]))
        elif kind is FormulationKind.HIGH_CONTRAST_DIRICHLET:
            acc = sum(system.leaves_by_key[("D", "ext", m, n)].op.entries @ first[n] for n in range(ell))
            out.append(ObjectTraces(second[m], solver.solve(acc) + gn, first[m]))
        else:
            out.append(ObjectTraces(first[m], second[m]))
    return SolutionTraces(kind, out)


def memory_estimate(n_dofs_per_object, n_objects=1) -> int:
    """Bytes of one explicit dense system matrix, ``(2 N l)^2 * 16``."""
    return int((2 * n_dofs_per_object * n_objects) ** 2 * 16)

