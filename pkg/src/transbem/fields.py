"""Incident plane waves, off-surface field evaluation and analytic references."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .quadrature import triangle_rule_collapsed

DEFAULT_DIRECTION = (1 / math.sqrt(3), 1 / math.sqrt(3), 1 / math.sqrt(3))

INTERIOR, EXTERIOR, EXCLUDED = "interior", "exterior", "excluded"


class SeriesConvergenceError(RuntimeError):
    pass


class PointOnSurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class PlaneWave:
    k: float
    direction: tuple = DEFAULT_DIRECTION
    amplitude: complex = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("plane-wave direction must be a unit vector")

    def __call__(self, points):
        d = np.asarray(self.direction, dtype=float)
        return self.amplitude * np.exp(1j * self.k * (np.asarray(points, float) @ d))

    def normal_derivative(self, points, normals):
        d = np.asarray(self.direction, dtype=float)
        return 1j * self.k * (np.asarray(normals) @ d) * self(points)


def incident_traces(wave: PlaneWave, mesh):
    """Nodal Dirichlet and Neumann traces, using area-weighted vertex normals."""
    gd = wave(mesh.vertices)
    gn = wave.normal_derivative(mesh.vertices, mesh.vertex_normals)
    return gd, gn


# ---------------------------------------------------------------- evaluation

@dataclass
class FieldGrid:
    points: np.ndarray
    tags: np.ndarray
    values: np.ndarray

    @property
    def excluded(self):
        return self.tags == EXCLUDED


FIELD_RULE = triangle_rule_collapsed(6)


def potentials(points, mesh, k, single=None, double=None, rule=FIELD_RULE):
    """Return ``(V psi)(x)`` and ``(K phi)(x)`` at off-surface points."""
    n = mesh.n_vertices
    single = np.zeros(n, complex) if single is None else np.asarray(single, complex)
    double = np.zeros(n, complex) if double is None else np.asarray(double, complex)
    bary, w = rule
    return _kernels.evaluate_potentials(
        np.ascontiguousarray(points, dtype=float), mesh.vertices, mesh.triangles,
        mesh.normals, mesh.areas, bary, w, float(k), single, double,
    )


def classify_points(points, meshes, exclusion=1.0, on_surface="raise"):
    """Tag each point interior (with owning object), exterior, or excluded
    when closer than ``exclusion`` local mesh sizes to a surface.

    Points exactly on a surface raise :class:`PointOnSurfaceError` unless
    ``on_surface="exclude"``.
    """
    points = np.ascontiguousarray(points, dtype=float)
    tags = np.full(len(points), EXTERIOR, dtype=object)
    owner = np.full(len(points), -1)
    for m, mesh in enumerate(meshes):
        dist, tri = _kernels.point_triangle_distance(points, mesh.vertices, mesh.triangles)
        if on_surface == "raise" and np.any(dist == 0.0):
            raise PointOnSurfaceError("evaluation point lies on the surface")
        near = (dist < exclusion * mesh.triangle_max_edge[tri]) | (dist == 0.0)
        wind = _kernels.solid_angle_sum(points, mesh.vertices, mesh.triangles)
        inside = wind > 0.5
        owner[inside] = m
        tags[inside] = INTERIOR
        tags[near] = EXCLUDED
    return tags, owner


def evaluate_field(traces, meshes, exterior, interiors, frequency, wave, points, exclusion=1.0,
                   on_surface="raise"):
    """Total pressure at points from solved surface data.

    ``traces`` is a :class:`~transbem.formulations.SolutionTraces`.  Exterior
    values use the same representation the formulation was built on
    (single-layer, double-layer or direct) plus the incident wave; interior
    values use the direct interior representation from the transmitted traces.
    """
    points = np.ascontiguousarray(points, dtype=float)
    tags, owner = classify_points(points, meshes, exclusion, on_surface)
    values = np.full(len(points), np.nan + 0j)
    k0 = exterior.wavenumber(frequency)
    ext = tags == EXTERIOR
    if ext.any():
        p = points[ext]
        total = wave(p)
        for m, mesh in enumerate(meshes):
            obj = traces.objects[m]
            if traces.representation == "single":
                sl, _ = potentials(p, mesh, k0, single=obj.auxiliary)
                total = total + sl
            elif traces.representation == "double":
                _, dl = potentials(p, mesh, k0, double=obj.auxiliary)
                total = total - dl
            else:
                sl, dl = potentials(p, mesh, k0, single=obj.neumann, double=obj.dirichlet)
                total = total + dl - sl
        values[ext] = total
    for m, mesh in enumerate(meshes):
        sel = (tags == INTERIOR) & (owner == m)
        if not sel.any():
            continue
        obj = traces.objects[m]
        km = interiors[m].wavenumber(frequency)
        psi = interiors[m].rho / exterior.rho * obj.neumann
        sl, dl = potentials(points[sel], mesh, km, single=psi, double=obj.dirichlet)
        values[sel] = sl - dl
    return FieldGrid(points, tags, values)


# ---------------------------------------------------------------- spherical Bessel

def spherical_jy(nmax, x):
    """Spherical Bessel ``j_n, y_n`` and derivatives for ``n = 0..nmax`` at
    scalar ``x > 0``.

    ``y_n`` comes from upward recurrence.  ``j_n`` uses upward recurrence
    while ``n < x`` and Miller's downward recurrence above, normalised
    against the closed-form ``j_0``/``j_1``.
    """
    x = float(x)
    if x <= 0.0:
        raise ValueError("argument must be positive")
    n = np.arange(nmax + 1)
    y = np.empty(nmax + 2)
    y[0] = -math.cos(x) / x
    y[1] = -math.cos(x) / x ** 2 - math.sin(x) / x
    for m in range(1, nmax + 1):
        y[m + 1] = (2 * m + 1) / x * y[m] - y[m - 1]

    j0 = math.sin(x) / x
    j1 = math.sin(x) / x ** 2 - math.cos(x) / x
    j = np.empty(nmax + 2)
    j[0], j[1] = j0, j1
    n_up = min(nmax + 1, int(x))
    for m in range(1, n_up):
        j[m + 1] = (2 * m + 1) / x * j[m] - j[m - 1]
    if n_up < nmax + 1:
        start = nmax + 1 + int(math.sqrt(40 * (nmax + 1))) + 20
        hi, lo = 0.0, 1e-300
        down = np.empty(nmax + 2)
        for m in range(start, 0, -1):
            cur = (2 * m + 1) / x * lo - hi
            hi, lo = lo, cur
            if m - 1 <= nmax + 1:
                down[m - 1] = cur
            if abs(cur) > 1e250:
                hi *= 1e-250
                lo *= 1e-250
                down[m - 1:] *= 1e-250
        scale = j0 / down[0] if abs(j0) >= abs(j1) else j1 / down[1]
        down *= scale
        j[n_up + 1:] = down[n_up + 1:]
    jp = np.empty(nmax + 1)
    yp = np.empty(nmax + 1)
    jp[0], yp[0] = -j[1], -y[1]
    jp[1:] = j[:nmax] - (n[1:] + 1) / x * j[1:nmax + 1]
    yp[1:] = y[:nmax] - (n[1:] + 1) / x * y[1:nmax + 1]
    return j[:nmax + 1], jp, y[:nmax + 1], yp


def _legendre(nmax, t):
    t = np.asarray(t, float)
    P = np.empty((nmax + 1,) + t.shape)
    P[0] = 1.0
    if nmax >= 1:
        P[1] = t
    for n in range(1, nmax):
        P[n + 1] = ((2 * n + 1) * t * P[n] - n * P[n - 1]) / (n + 1)
    return P


MODE_CAP = 200


@dataclass(frozen=True)
class SphereCoefficients:
    scattered: np.ndarray
    transmitted: np.ndarray

    @property
    def nmax(self):
        return len(self.scattered) - 1


def _mode_count(x):
    return int(x + 4 * x ** (1 / 3) + 10)


def sphere_coefficients(k_plus, k_minus, rho_plus, rho_minus, radius=1.0, tol=1e-12, nmin=0):
    """Partial-wave coefficients of the fluid sphere transmission problem.

    With ``p_inc = sum (2n+1) i^n j_n(k+ r) P_n``, the scattered field is
    ``sum (2n+1) i^n A_n h_n(k+ r) P_n`` and the interior field
    ``sum (2n+1) i^n B_n j_n(k- r) P_n``.  Pressure and ``rho^{-1} dp/dr`` are
    continuous at ``r = radius``.  Coefficients are zero-padded to ``nmin``
    modes so the incident expansion converges where it is evaluated.
    """
    xp, xm = k_plus * radius, k_minus * radius
    nmax = _mode_count(max(xp, xm))
    while True:
        if nmax > MODE_CAP:
            raise SeriesConvergenceError(f"series needs more than {MODE_CAP} modes (ka={xp:.3g})")
        jp_, djp, yp_, dyp = spherical_jy(nmax, xp)
        jm_, djm, _, _ = spherical_jy(nmax, xm)
        hp, dhp = jp_ + 1j * yp_, djp + 1j * dyp
        gamma = (k_minus * rho_plus) / (k_plus * rho_minus)
        det = dhp * jm_ - gamma * hp * djm
        A = -(djp * jm_ - gamma * jp_ * djm) / det
        B = (1j / xp ** 2) / det
        mags = np.abs(A) * (2 * np.arange(nmax + 1) + 1)
        if mags.max() == 0.0 or mags[-1] < tol * mags.max():
            pad = max(nmin - nmax, 0)
            return SphereCoefficients(np.pad(A, (0, pad)), np.pad(B, (0, pad)))
        nmax = int(nmax * 1.5) + 1


def sphere_series_oracle(pair, radius, wave, points, tol=1e-12):
    """Total exterior / interior pressure of a plane wave on a fluid sphere
    centred at the origin."""
    pts = np.atleast_2d(np.asarray(points, float))
    r = np.linalg.norm(pts, axis=1)
    reach = pair.k_plus * max(float(r.max(initial=0.0)), radius)
    coeffs = sphere_coefficients(pair.k_plus, pair.k_minus, pair.rho_plus, pair.rho_minus, radius, tol,
                                 nmin=_mode_count(reach))
    d = np.asarray(wave.direction, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(r > 0, pts @ d / np.where(r > 0, r, 1.0), 1.0)
    nmax = coeffs.nmax
    P = _legendre(nmax, np.clip(cos_t, -1.0, 1.0))
    n = np.arange(nmax + 1)
    pref = (2 * n + 1) * (1j ** n)
    out = np.zeros(len(pts), complex)
    for idx in range(len(pts)):
        if r[idx] >= radius:
            j, _, y, _ = spherical_jy(nmax, pair.k_plus * r[idx])
            radial = j + coeffs.scattered * (j + 1j * y)
        elif r[idx] > 0:
            j, _, _, _ = spherical_jy(nmax, pair.k_minus * r[idx])
            radial = coeffs.transmitted * j
        else:
            radial = np.zeros(nmax + 1, complex)
            radial[0] = coeffs.transmitted[0]
        out[idx] = np.sum(pref * radial * P[:, idx])
    return wave.amplitude * out


def rigid_sphere_coefficients(k, radius, nmax):
    j, dj, y, dy = spherical_jy(nmax, k * radius)
    return -dj / (dj + 1j * dy)


def scattering_cross_sections(coeffs: SphereCoefficients, k):
    """Scattering and extinction (optical theorem) cross-sections."""
    n = np.arange(len(coeffs.scattered))
    a = coeffs.scattered
    sigma_sca = 4 * np.pi / k ** 2 * np.sum((2 * n + 1) * np.abs(a) ** 2)
    forward = -1j / k * np.sum((2 * n + 1) * a)
    sigma_ext = 4 * np.pi / k * forward.imag
    return float(sigma_sca), float(sigma_ext)


# ---------------------------------------------------------------- rigid cube

def cube_resonances(k_max, edge=1.0):
    """Rigid unit-cube resonance wavenumbers ``pi*sqrt(nx^2+ny^2+nz^2)`` up to
    ``k_max``, listed with multiplicity."""
    if k_max <= 0:
        raise ValueError("k_max must be positive")
    nmax = int(k_max * edge / math.pi) + 1
    ks = []
    for nx in range(1, nmax + 1):
        for ny in range(1, nmax + 1):
            for nz in range(1, nmax + 1):
                kn = math.pi / edge * math.sqrt(nx * nx + ny * ny + nz * nz)
                if kn <= k_max:
                    ks.append(kn)
    return sorted(ks)
