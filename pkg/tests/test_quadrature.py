import math

import numpy as np
import pytest

from transbem.quadrature import (
    COINCIDENT,
    EDGE,
    VERTEX,
    QuadratureRule,
    sauter_schwab_rule,
    triangle_rule_collapsed,
    triangle_rule_order4,
)


def monomial_exact(a, b):
    # integral of x^a y^b over the unit right triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def rule_integral(rule, a, b):
    bary, w = rule
    return 0.5 * np.sum(w * bary[:, 1] ** a * bary[:, 2] ** b)


@pytest.mark.parametrize("a,b", [(i, d - i) for d in range(5) for i in range(d + 1)])
def test_order4_rule_exact_to_degree4(a, b):
    assert rule_integral(triangle_rule_order4(), a, b) == pytest.approx(monomial_exact(a, b), rel=1e-12, abs=1e-15)


def test_order4_rule_not_exact_at_degree6():
    errs = [abs(rule_integral(triangle_rule_order4(), a, 6 - a) - monomial_exact(a, 6 - a)) for a in range(7)]
    assert max(errs) > 1e-8


def test_order4_rule_weights_positive():
    bary, w = triangle_rule_order4()
    assert np.all(w > 0) and w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(bary.sum(axis=1), 1.0)


@pytest.mark.parametrize("order", [2, 5, 8])
def test_collapsed_rule_exactness(order):
    deg = 2 * order - 2
    for a in range(deg + 1):
        b = deg - a
        assert rule_integral(triangle_rule_collapsed(order), a, b) == pytest.approx(
            monomial_exact(a, b), rel=1e-11, abs=1e-16)


def test_quadrature_rule_default():
    r = QuadratureRule.default()
    assert r.regular_order == 4
    assert np.all(r.regular_weights > 0)


def bary_monomial_exact(p):
    a, b, c = p
    return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 2)


@pytest.mark.parametrize("relation", [COINCIDENT, EDGE, VERTEX])
def test_sauter_schwab_polynomial_products(relation):
    # smooth separable integrand: the pair integral factorises
    x, y, w = sauter_schwab_rule(relation, order=6)
    assert w.sum() == pytest.approx(0.25, rel=1e-13)
    assert np.all(w > 0)
    for px, py in [((1, 0, 0), (0, 1, 0)), ((0, 2, 1), (1, 0, 2)), ((2, 1, 0), (0, 0, 3))]:
        f = np.prod(x ** np.array(px), axis=1) * np.prod(y ** np.array(py), axis=1)
        assert np.sum(w * f) == pytest.approx(bary_monomial_exact(px) * bary_monomial_exact(py), rel=1e-10)


def flat_triangle_potential(p, tri):
    """Closed form of ``int_T 1/|p - y| dy`` for ``p`` in the triangle's plane."""
    if _cross2(tri[1] - tri[0], tri[2] - tri[0]) < 0:
        tri = tri[::-1]
    total = 0.0
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        t = (b - a) / np.linalg.norm(b - a)
        n = np.array([t[1], -t[0]])
        d = np.dot(a - p, n)
        sa, sb = np.dot(a - p, t), np.dot(b - p, t)
        ra, rb = np.linalg.norm(a - p), np.linalg.norm(b - p)
        if abs(d) > 1e-15:
            total += d * math.log((sb + rb) / (sa + ra))
    return total


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def reference_pair_integral(tx, ty):
    bary, wts = triangle_rule_collapsed(40)
    pts = bary @ tx
    area = 0.5 * abs(_cross2(tx[1] - tx[0], tx[2] - tx[0]))
    vals = np.array([flat_triangle_potential(p, ty) for p in pts])
    return area * np.sum(wts * vals)


def sauter_schwab_pair_integral(tx, ty, relation, order):
    x, y, w = sauter_schwab_rule(relation, order)
    px, py = x @ tx, y @ ty
    r = np.linalg.norm(px - py, axis=1)
    ax = 0.5 * abs(_cross2(tx[1] - tx[0], tx[2] - tx[0]))
    ay = 0.5 * abs(_cross2(ty[1] - ty[0], ty[2] - ty[0]))
    return 4 * ax * ay * np.sum(w / r)


P0, P1, P2 = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.3, 0.8])


@pytest.mark.parametrize("relation,tx,ty", [
    (COINCIDENT, [P0, P1, P2], [P0, P1, P2]),
    (EDGE, [P0, P1, P2], [P0, P1, np.array([0.6, -0.7])]),
    (VERTEX, [P0, P1, P2], [P0, np.array([-0.9, -0.2]), np.array([-0.4, -0.9])]),
])
def test_sauter_schwab_laplace_kernel_against_closed_form(relation, tx, ty):
    tx, ty = np.array(tx), np.array(ty)
    ref = reference_pair_integral(tx, ty)
    approx = sauter_schwab_pair_integral(tx, ty, relation, order=8)
    assert approx == pytest.approx(ref, rel=1e-6)
    coarse = sauter_schwab_pair_integral(tx, ty, relation, order=4)
    assert coarse == pytest.approx(ref, rel=1e-3)


def test_sauter_schwab_unknown_relation():
    with pytest.raises(ValueError):
        sauter_schwab_rule(7)
