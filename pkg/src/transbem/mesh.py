"""Closed triangular surface meshes: generation, Gmsh import/export, validation."""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


class MeshParseError(MeshError):
    pass


class MeshTopologyError(MeshError):
    pass


class MeshOrientationError(MeshError):
    pass


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Indexed triangle mesh of a closed surface with outward normals.

    Use :meth:`from_arrays` (or the generators) to build one; the raw
    constructor performs no checks.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    @classmethod
    def from_arrays(cls, vertices, triangles, validate=True):
        mesh = cls(
            _readonly(np.asarray(vertices, dtype=np.float64).reshape(-1, 3)),
            _readonly(np.asarray(triangles, dtype=np.int64).reshape(-1, 3)),
        )
        if validate:
            mesh.validate()
        return mesh

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def _cross(self):
        p = self.vertices[self.triangles]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return _readonly(0.5 * np.linalg.norm(self._cross, axis=1))

    @cached_property
    def normals(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            n = self._cross / np.linalg.norm(self._cross, axis=1)[:, None]
        return _readonly(n)

    @cached_property
    def centroids(self) -> np.ndarray:
        return _readonly(self.vertices[self.triangles].mean(axis=1))

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of the adjacent triangle normals."""
        acc = np.zeros_like(self.vertices)
        for c in range(3):
            np.add.at(acc, self.triangles[:, c], self._cross)
        return _readonly(acc / np.linalg.norm(acc, axis=1)[:, None])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return _readonly(np.unique(np.sort(e, axis=1), axis=0))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return _readonly(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1))

    @cached_property
    def triangle_max_edge(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lengths = np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)], axis=1)
        return _readonly(lengths.max(axis=1))

    @property
    def h(self) -> float:
        return float(self.edge_lengths.max())

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def signed_volume(self) -> float:
        p = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    def area_vector_sum(self) -> np.ndarray:
        return 0.5 * self._cross.sum(axis=0)

    def translated(self, offset) -> "SurfaceMesh":
        return SurfaceMesh.from_arrays(self.vertices + np.asarray(offset, float), self.triangles, validate=False)

    def flipped(self) -> "SurfaceMesh":
        return SurfaceMesh.from_arrays(self.vertices, self.triangles[:, ::-1], validate=False)

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def validate(self):
        """Raise a :class:`MeshError` unless the mesh is closed, consistently
        oriented, non-degenerate and encloses positive volume."""
        t = self.triangles
        if t.size == 0:
            raise MeshTopologyError("mesh has no triangles")
        if t.min() < 0 or t.max() >= self.n_vertices:
            raise MeshTopologyError("triangle references an invalid vertex index")
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MeshTopologyError("triangle with repeated vertex")
        if np.any(self.areas <= 0.0):
            raise MeshTopologyError("zero-area triangle")
        counts = _directed_edge_counts(t)
        for (a, b), n in counts.items():
            if n != 1 or counts.get((b, a), 0) != 1:
                undirected = n + counts.get((b, a), 0)
                if undirected != 2:
                    raise MeshTopologyError(f"edge ({a}, {b}) shared by {undirected} triangles")
                raise MeshOrientationError(f"inconsistent winding across edge ({a}, {b})")
        if self.signed_volume() <= 0.0:
            raise MeshOrientationError("normals point inward (signed volume <= 0)")
        return self


def _directed_edge_counts(triangles):
    counts = defaultdict(int)
    for a, b, c in triangles.tolist():
        counts[(a, b)] += 1
        counts[(b, c)] += 1
        counts[(c, a)] += 1
    return counts


# ---------------------------------------------------------------- generators

def make_icosphere(radius=1.0, subdivision_level=0, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    if radius <= 0:
        raise ValueError("radius must be positive")
    if subdivision_level < 0:
        raise ValueError("subdivision_level must be non-negative")
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = [np.array(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivision_level):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = v[a] + v[b]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    vertices = radius * np.array(v) + np.asarray(center, dtype=float)
    return SurfaceMesh.from_arrays(vertices, np.array(faces))


def make_cube(edge=1.0, target_h=None, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Structured cube surface: ``n = ceil(edge / target_h)`` squares per side,
    each split into two triangles."""
    if edge <= 0:
        raise ValueError("edge must be positive")
    if target_h is None:
        target_h = edge
    if not 0 < target_h <= edge:
        raise ValueError("target_h must satisfy 0 < target_h <= edge")
    n = int(math.ceil(edge / target_h - 1e-12))
    index = {}
    points = []

    def vid(p):
        if p not in index:
            index[p] = len(points)
            points.append(p)
        return index[p]

    tris = []
    # (fixed axis, fixed value, u axis, v axis) with u x v along the outward normal
    sides = [(0, n, 1, 2), (0, 0, 2, 1), (1, n, 2, 0), (1, 0, 0, 2), (2, n, 0, 1), (2, 0, 1, 0)]
    for axis, value, ua, va in sides:
        for i in range(n):
            for j in range(n):
                corner = []
                for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    p = [0, 0, 0]
                    p[axis], p[ua], p[va] = value, i + di, j + dj
                    corner.append(vid(tuple(p)))
                a, b, c, d = corner
                tris += [(a, b, c), (a, c, d)]
    vertices = np.array(points, dtype=float) * (edge / n) - edge / 2.0 + np.asarray(center, dtype=float)
    return SurfaceMesh.from_arrays(vertices, np.array(tris))


# ---------------------------------------------------------------- quality

@dataclass(frozen=True)
class MeshQuality:
    min_edge: float
    max_edge: float
    elements_per_wavelength: float


def mesh_quality(mesh: SurfaceMesh, k: float) -> MeshQuality:
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    lengths = mesh.edge_lengths
    hmax = float(lengths.max())
    return MeshQuality(float(lengths.min()), hmax, (2.0 * math.pi / k) / hmax)


def cube_divisions_for(k: float, edge=1.0, elements_per_wavelength=6.0) -> int:
    """Smallest structured subdivision whose diagonal edge gives the requested
    elements per wavelength."""
    wavelength = 2.0 * math.pi / k
    return max(1, int(math.ceil(elements_per_wavelength * edge * math.sqrt(2.0) / wavelength - 1e-9)))


# ---------------------------------------------------------------- Gmsh I/O

def import_msh(path) -> SurfaceMesh:
    """Read a Gmsh MSH 2.2 ASCII file, keeping 3-node triangles only.

    Winding is made consistent by breadth-first propagation over shared edges
    and each connected component is then flipped, if needed, so that its signed
    volume is positive.
    """
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines()]
    try:
        fmt = _section(lines, "MeshFormat")
        version = fmt[0].split()
        if not version[0].startswith("2") or version[1] != "0":
            raise MeshParseError(f"unsupported MSH format {fmt[0]!r}; expected 2.2 ASCII")
        node_lines = _section(lines, "Nodes")
        n_nodes = int(node_lines[0])
        tags, coords = [], []
        for ln in node_lines[1:1 + n_nodes]:
            parts = ln.split()
            tags.append(int(parts[0]))
            coords.append([float(x) for x in parts[1:4]])
        if len(tags) != n_nodes:
            raise MeshParseError("truncated $Nodes section")
        elem_lines = _section(lines, "Elements")
        n_elem = int(elem_lines[0])
        tris = []
        for ln in elem_lines[1:1 + n_elem]:
            parts = [int(x) for x in ln.split()]
            if parts[1] == 2:
                ntags = parts[2]
                tris.append(parts[3 + ntags:6 + ntags])
        if len(elem_lines) - 1 < n_elem:
            raise MeshParseError("truncated $Elements section")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshParseError(f"malformed MSH file: {exc}") from exc
    if not tris:
        raise MeshParseError("no 3-node triangle elements found")

    tag_index = {t: i for i, t in enumerate(tags)}
    try:
        tri = np.array([[tag_index[t] for t in row] for row in tris], dtype=np.int64)
    except KeyError as exc:
        raise MeshParseError(f"element references unknown node {exc}") from exc
    used, tri = np.unique(tri, return_inverse=True)
    tri = tri.reshape(-1, 3)
    vertices = np.array(coords, dtype=float)[used]
    tri = _repair_orientation(vertices, tri)
    return SurfaceMesh.from_arrays(vertices, tri)


def _section(lines, name):
    start = lines.index(f"${name}")
    end = lines.index(f"$End{name}", start)
    return lines[start + 1:end]


def _repair_orientation(vertices, tri):
    edge_tris = defaultdict(list)
    for t, (a, b, c) in enumerate(tri.tolist()):
        for u, w in ((a, b), (b, c), (c, a)):
            edge_tris[(min(u, w), max(u, w))].append(t)
    for e, ts in edge_tris.items():
        if len(ts) != 2:
            raise MeshTopologyError(f"edge {e} shared by {len(ts)} triangles")

    tri = tri.copy()
    seen = np.zeros(len(tri), dtype=bool)
    for seed in range(len(tri)):
        if seen[seed]:
            continue
        component = [seed]
        seen[seed] = True
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            a, b, c = tri[t]
            for u, w in ((a, b), (b, c), (c, a)):
                for s in edge_tris[(min(u, w), max(u, w))]:
                    if s == t or seen[s]:
                        continue
                    # a consistent neighbour traverses the shared edge as (w, u)
                    if _has_directed_edge(tri[s], u, w):
                        tri[s] = tri[s][::-1]
                    seen[s] = True
                    component.append(s)
                    queue.append(s)
        p = vertices[tri[component]]
        vol = np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0
        if vol < 0:
            tri[component] = tri[component][:, ::-1]
        elif vol == 0:
            raise MeshOrientationError("component encloses zero volume")
    return tri


def _has_directed_edge(t, u, w):
    a, b, c = t
    return (a, b) == (u, w) or (b, c) == (u, w) or (c, a) == (u, w)


def export_msh(mesh: SurfaceMesh, path):
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_vertices)]
    out += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.vertices.tolist())]
    out += ["$EndNodes", "$Elements", str(mesh.n_triangles)]
    out += [f"{i + 1} 2 2 1 1 {a + 1} {b + 1} {c + 1}" for i, (a, b, c) in enumerate(mesh.triangles.tolist())]
    out += ["$EndElements", ""]
    Path(path).write_text("\n".join(out))


def min_distance(a: SurfaceMesh, b: SurfaceMesh) -> float:
    """Minimum vertex-to-vertex distance between two meshes."""
    d = np.inf
    for chunk in np.array_split(a.vertices, max(1, a.n_vertices // 512)):
        diff = chunk[:, None, :] - b.vertices[None, :, :]
        d = min(d, float(np.sqrt((diff ** 2).sum(-1)).min()))
    return d
