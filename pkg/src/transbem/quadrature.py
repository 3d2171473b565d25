"""Quadrature rules for triangles and singular triangle pairs.

Reference triangle for the singular rules is ``{(s, t): 0 <= t <= s <= 1}``
with vertices (0, 0), (1, 0), (1, 1); a point maps to barycentric
coordinates ``(1 - s, s - t, t)``.  Common edges run (0, 0) -> (1, 0) and the
common vertex is (0, 0) in both triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COINCIDENT, EDGE, VERTEX = 0, 1, 2

# Symmetric degree-4 rule (Dunavant, 6 points); weights sum to one.
_A, _WA = 0.445948490915965, 0.223381589678011
_B, _WB = 0.091576213509771, 0.109951743655322


def triangle_rule_order4():
    """Barycentric points and weights (summing to one) of the 6-point rule."""
    pts = []
    wts = []
    for a, w in ((_A, _WA), (_B, _WB)):
        for bary in ((1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)):
            pts.append(bary)
            wts.append(w)
    return np.array(pts), np.array(wts)


def triangle_rule_collapsed(order):
    """Conical-product Gauss rule exact for degree ``2*order - 2``."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    s = x[:, None] * np.ones(order)[None, :]
    t = x[:, None] * x[None, :]
    ww = (w[:, None] * w[None, :]) * x[:, None]
    s, t, ww = s.ravel(), t.ravel(), ww.ravel()
    bary = np.stack([1.0 - s, s - t, t], axis=1)
    return bary, 2.0 * ww


def sauter_schwab_rule(relation, order=4):
    """Points and weights for the integral over reference triangle pairs.

    Returns ``(xbary, ybary, w)`` with ``sum(w * f(x, y))`` approximating the
    integral over the reference pair where each reference triangle has area
    1/2 (so ``sum(w) == 1/4``).
    """
    g, gw = np.polynomial.legendre.leggauss(order)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    grids = np.meshgrid(g, g, g, g, indexing="ij")
    weights = np.meshgrid(gw, gw, gw, gw, indexing="ij")
    xi, e1, e2, e3 = (a.ravel() for a in grids)
    w4 = np.prod([a.ravel() for a in weights], axis=0)

    regions = []
    if relation == COINCIDENT:
        jac = xi ** 3 * e1 ** 2 * e2
        regions = [
            ((xi, xi * (1 - e1 + e1 * e2)), (xi * (1 - e1 * e2 * e3), xi * (1 - e1))),
            ((xi * (1 - e1 * e2 * e3), xi * (1 - e1)), (xi, xi * (1 - e1 + e1 * e2))),
            ((xi, xi * e1 * (1 - e2 + e2 * e3)), (xi * (1 - e1 * e2), xi * e1 * (1 - e2))),
            ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * (1 - e2 + e2 * e3))),
            ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * (1 - e2))),
            ((xi, xi * e1 * (1 - e2)), (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3))),
        ]
        jacs = [jac] * 6
    elif relation == EDGE:
        j1 = xi ** 3 * e1 ** 2
        j2 = xi ** 3 * e1 ** 2 * e2
        regions = [
            ((xi, xi * e1 * e3), (xi * (1 - e1 * e2), xi * e1 * (1 - e2))),
            ((xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3))),
            ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3)),
            ((xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1)),
            ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2)),
        ]
        jacs = [j1, j2, j2, j2, j2]
    elif relation == VERTEX:
        jac = xi ** 3 * e2
        regions = [
            ((xi, xi * e1), (xi * e2, xi * e2 * e3)),
            ((xi * e2, xi * e2 * e3), (xi, xi * e1)),
        ]
        jacs = [jac, jac]
    else:
        raise ValueError(f"unknown relation {relation}")

    xs, ys, ws = [], [], []
    for ((sx, tx), (sy, ty)), jac in zip(regions, jacs):
        xs.append(np.stack([1 - sx, sx - tx, tx], axis=1))
        ys.append(np.stack([1 - sy, sy - ty, ty], axis=1))
        ws.append(w4 * jac)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


@dataclass(frozen=True)
class QuadratureRule:
    """Regular triangle rule plus Sauter-Schwab order for singular pairs."""

    regular_points: np.ndarray
    regular_weights: np.ndarray
    singular_order: int = 4

    @classmethod
    def default(cls, singular_order=4):
        p, w = triangle_rule_order4()
        return cls(p, w, singular_order)

    @property
    def regular_order(self) -> int:
        return 4 if len(self.regular_weights) == 6 else 2 * int(round(np.sqrt(len(self.regular_weights)))) - 1

    def singular(self, relation):
        return sauter_schwab_rule(relation, self.singular_order)
