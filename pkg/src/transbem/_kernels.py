"""Compiled inner loops for Galerkin assembly and potential evaluation."""

import numpy as np
from numba import njit

INV4PI = 1.0 / (4.0 * np.pi)


@njit(cache=True)
def _physical_points(verts, tris, bary):
    nt = tris.shape[0]
    nq = bary.shape[0]
    out = np.zeros((nt, nq, 3))
    for t in range(nt):
        for q in range(nq):
            for c in range(3):
                for d in range(3):
                    out[t, q, d] += bary[q, c] * verts[tris[t, c], d]
    return out


@njit(cache=True)
def _relation(ti, tj, px, py):
    """Classify a same-mesh pair and fill canonical local orderings.

    Returns 0 coincident, 1 edge, 2 vertex, -1 disjoint.
    """
    shared_i = np.empty(3, np.int64)
    shared_j = np.empty(3, np.int64)
    ns = 0
    for a in range(3):
        for b in range(3):
            if ti[a] == tj[b]:
                shared_i[ns] = a
                shared_j[ns] = b
                ns += 1
    if ns == 0:
        return -1
    if ns == 3:
        for a in range(3):
            px[a] = a
            py[a] = a
        return 0
    if ns == 2:
        px[0], px[1] = shared_i[0], shared_i[1]
        py[0], py[1] = shared_j[0], shared_j[1]
        px[2] = 3 - px[0] - px[1]
        py[2] = 3 - py[0] - py[1]
        return 1
    px[0] = shared_i[0]
    py[0] = shared_j[0]
    px[1] = (px[0] + 1) % 3
    px[2] = (px[0] + 2) % 3
    py[1] = (py[0] + 1) % 3
    py[2] = (py[0] + 2) % 3
    return 2


@njit(cache=True)
def _green(k, r):
    kr = k * r
    s = INV4PI / r
    return complex(np.cos(kr) * s, np.sin(kr) * s)


@njit(cache=True)
def assemble_vkd(xverts, xtris, xnormals, xareas, xcurls,
                 yverts, ytris, ynormals, yareas, ycurls,
                 k, same, reg_bary, reg_w,
                 ss_x, ss_y, ss_w, ss_off, V, K, D):
    """Accumulate single-layer, double-layer and hypersingular Galerkin
    matrices for P1 test functions on mesh x and P1 trial functions on mesh y.

    ``ss_x/ss_y/ss_w`` hold the concatenated Sauter-Schwab rules for the
    coincident, edge and vertex cases, delimited by ``ss_off``.  On a single
    mesh each unordered triangle pair is integrated once and mirrored, which
    keeps ``V`` and ``D`` exactly symmetric.
    """
    nx = xtris.shape[0]
    ny = ytris.shape[0]
    nq = reg_w.shape[0]
    XP = _physical_points(xverts, xtris, reg_bary)
    YP = _physical_points(yverts, ytris, reg_bary)
    ik = 1j * k
    k2 = k * k
    px = np.empty(3, np.int64)
    py = np.empty(3, np.int64)
    vloc = np.zeros((3, 3), np.complex128)
    kloc = np.zeros((3, 3), np.complex128)
    tloc = np.zeros((3, 3), np.complex128)
    gqp = np.zeros((nq, nq), np.complex128)
    kqp = np.zeros((nq, nq), np.complex128)
    tqp = np.zeros((nq, nq), np.complex128)
    for i in range(nx):
        ti = xtris[i]
        nxv = xnormals[i]
        jstart = i if same else 0
        for j in range(jstart, ny):
            tj = ytris[j]
            nyv = ynormals[j]
            rel = -1
            if same:
                rel = _relation(ti, tj, px, py)
            s0 = 0.0 + 0.0j
            for a in range(3):
                for b in range(3):
                    vloc[a, b] = 0.0
                    kloc[a, b] = 0.0
                    tloc[a, b] = 0.0
            if rel < 0:
                fac = xareas[i] * yareas[j]
                for q in range(nq):
                    for p in range(nq):
                        d0 = YP[j, p, 0] - XP[i, q, 0]
                        d1 = YP[j, p, 1] - XP[i, q, 1]
                        d2 = YP[j, p, 2] - XP[i, q, 2]
                        r = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                        g = _green(k, r) * (reg_w[q] * reg_w[p])
                        radial = g * (ik - 1.0 / r) / r
                        gqp[q, p] = g
                        kqp[q, p] = radial * (d0 * nyv[0] + d1 * nyv[1] + d2 * nyv[2])
                        tqp[q, p] = -radial * (d0 * nxv[0] + d1 * nxv[1] + d2 * nxv[2])
                        s0 += g
                for a in range(3):
                    for b in range(3):
                        sg = 0.0 + 0.0j
                        sk = 0.0 + 0.0j
                        st = 0.0 + 0.0j
                        for q in range(nq):
                            ba = reg_bary[q, a]
                            for p in range(nq):
                                f = ba * reg_bary[p, b]
                                sg += f * gqp[q, p]
                                sk += f * kqp[q, p]
                                st += f * tqp[q, p]
                        vloc[a, b] = sg
                        kloc[a, b] = sk
                        tloc[a, b] = st
                for a in range(3):
                    px[a] = a
                    py[a] = a
            else:
                fac = 4.0 * xareas[i] * yareas[j]
                lo = ss_off[rel]
                hi = ss_off[rel + 1]
                for m in range(lo, hi):
                    xp0 = 0.0
                    xp1 = 0.0
                    xp2 = 0.0
                    yp0 = 0.0
                    yp1 = 0.0
                    yp2 = 0.0
                    for c in range(3):
                        vx = xverts[ti[px[c]]]
                        vy = yverts[tj[py[c]]]
                        xp0 += ss_x[m, c] * vx[0]
                        xp1 += ss_x[m, c] * vx[1]
                        xp2 += ss_x[m, c] * vx[2]
                        yp0 += ss_y[m, c] * vy[0]
                        yp1 += ss_y[m, c] * vy[1]
                        yp2 += ss_y[m, c] * vy[2]
                    d0 = yp0 - xp0
                    d1 = yp1 - xp1
                    d2 = yp2 - xp2
                    r = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                    g = _green(k, r) * ss_w[m]
                    radial = g * (ik - 1.0 / r) / r
                    dk = radial * (d0 * nyv[0] + d1 * nyv[1] + d2 * nyv[2])
                    dt = -radial * (d0 * nxv[0] + d1 * nxv[1] + d2 * nxv[2])
                    s0 += g
                    for a in range(3):
                        for b in range(3):
                            f = ss_x[m, a] * ss_y[m, b]
                            vloc[a, b] += g * f
                            kloc[a, b] += dk * f
                            tloc[a, b] += dt * f
            nn = nxv[0] * nyv[0] + nxv[1] * nyv[1] + nxv[2] * nyv[2]
            mirror = same and i != j
            for a in range(3):
                ga = ti[px[a]]
                ca = xcurls[i, px[a]]
                for b in range(3):
                    gb = tj[py[b]]
                    cb = ycurls[j, py[b]]
                    cc = ca[0] * cb[0] + ca[1] * cb[1] + ca[2] * cb[2]
                    v = fac * vloc[a, b]
                    d = fac * (cc * s0 - k2 * nn * vloc[a, b])
                    V[ga, gb] += v
                    K[ga, gb] += fac * kloc[a, b]
                    D[ga, gb] += d
                    if mirror:
                        V[gb, ga] += v
                        K[gb, ga] += fac * tloc[a, b]
                        D[gb, ga] += d


@njit(cache=True)
def evaluate_potentials(points, verts, tris, normals, areas, bary, w, k, sl_coeffs, dl_coeffs):
    """Evaluate single- and double-layer potentials of P1 densities at
    off-surface points with a fixed regular rule."""
    npts = points.shape[0]
    nt = tris.shape[0]
    nq = w.shape[0]
    YP = _physical_points(verts, tris, bary)
    ik = 1j * k
    sl = np.zeros(npts, np.complex128)
    dl = np.zeros(npts, np.complex128)
    for t in range(nt):
        tri = tris[t]
        n = normals[t]
        for q in range(nq):
            psi = 0.0 + 0.0j
            phi = 0.0 + 0.0j
            for c in range(3):
                psi += bary[q, c] * sl_coeffs[tri[c]]
                phi += bary[q, c] * dl_coeffs[tri[c]]
            wq = w[q] * areas[t]
            for i in range(npts):
                d0 = YP[t, q, 0] - points[i, 0]
                d1 = YP[t, q, 1] - points[i, 1]
                d2 = YP[t, q, 2] - points[i, 2]
                r = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                g = _green(k, r) * wq
                dn = (d0 * n[0] + d1 * n[1] + d2 * n[2]) / r
                sl[i] += g * psi
                dl[i] += g * (ik - 1.0 / r) * dn * phi
    return sl, dl


@njit(cache=True)
def solid_angle_sum(points, verts, tris):
    """Winding number of a closed oriented surface about each point
    (1 inside, 0 outside) via the Van Oosterom-Strackee formula."""
    npts = points.shape[0]
    out = np.zeros(npts)
    for i in range(npts):
        acc = 0.0
        for t in range(tris.shape[0]):
            a = verts[tris[t, 0]] - points[i]
            b = verts[tris[t, 1]] - points[i]
            c = verts[tris[t, 2]] - points[i]
            la = np.sqrt((a * a).sum())
            lb = np.sqrt((b * b).sum())
            lc = np.sqrt((c * c).sum())
            num = (a[0] * (b[1] * c[2] - b[2] * c[1])
                   - a[1] * (b[0] * c[2] - b[2] * c[0])
                   + a[2] * (b[0] * c[1] - b[1] * c[0]))
            den = la * lb * lc + (a * b).sum() * lc + (a * c).sum() * lb + (b * c).sum() * la
            acc += 2.0 * np.arctan2(num, den)
        out[i] = acc / (4.0 * np.pi)
    return out


@njit(cache=True)
def point_triangle_distance(points, verts, tris):
    """Distance from each point to the nearest triangle and that triangle's index."""
    npts = points.shape[0]
    dist = np.full(npts, np.inf)
    owner = np.zeros(npts, np.int64)
    for i in range(npts):
        p = points[i]
        for t in range(tris.shape[0]):
            d = _pt_tri(p, verts[tris[t, 0]], verts[tris[t, 1]], verts[tris[t, 2]])
            if d < dist[i]:
                dist[i] = d
                owner[i] = t
    return dist, owner


@njit(cache=True)
def _pt_tri(p, a, b, c):
    # Ericson, Real-Time Collision Detection, closest point on triangle
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum()
    d2 = (ac * ap).sum()
    if d1 <= 0.0 and d2 <= 0.0:
        q = a
    else:
        bp = p - b
        d3 = (ab * bp).sum()
        d4 = (ac * bp).sum()
        cp = p - c
        d5 = (ab * cp).sum()
        d6 = (ac * cp).sum()
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            q = b
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            q = a + ab * (d1 / (d1 - d3))
        elif d6 >= 0.0 and d5 <= d6:
            q = c
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            q = a + ac * (d2 / (d2 - d6))
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            q = b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)))
        else:
            den = 1.0 / (va + vb + vc)
            q = a + ab * (vb * den) + ac * (vc * den)
    diff = p - q
    return np.sqrt((diff * diff).sum())
