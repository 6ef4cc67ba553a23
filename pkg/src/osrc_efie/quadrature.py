"""Quadrature rules on the reference triangle.

Two reference conventions are used in the package:

* the *unit* triangle ``(0,0), (1,0), (0,1)`` for single-element rules,
  with a point ``(s, t)`` mapped to ``P0 + s (P1 - P0) + t (P2 - P0)``;
* the *Sauter-Schwab* triangle ``(0,0), (1,0), (1,1)`` for the singular
  double integrals, with ``(u, v)`` mapped to ``P0 + u (P1 - P0) + v (P2 - P1)``.

Weights of single-element rules sum to 1/2 (the reference area), so a
physical integral is ``2 * area * sum(w * f)``.
"""

from functools import lru_cache

import numpy as np


# Symmetric rules as (barycentric orbit generator, per-point weight); weights
# over all orbit points sum to 1.
_SYMMETRIC = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    5: [
        ((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827),
    ],
}


def _orbit(bary):
    a, b, c = bary
    pts = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
    return sorted(pts)


def _symmetric_rule(degree):
    pts, wts = [], []
    for gen, w in _SYMMETRIC[degree]:
        orbit = _orbit(gen)
        for p in orbit:
            pts.append((p[1], p[2]))
            wts.append(w)
    return np.array(pts), 0.5 * np.array(wts)


def _conical_rule(degree):
    # Collapsed Gauss-Legendre product rule, exact for polynomials of total
    # degree 2n - 1.
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    s = np.repeat(x, n)
    r = np.tile(x, n)
    pts = np.column_stack([s * (1.0 - r), r])
    wts = np.repeat(w, n) * np.tile(w, n) * (1.0 - r)
    return pts, wts


@lru_cache(maxsize=None)
def triangle_rule(degree=4):
    """Return ``(points, weights)`` on the unit reference triangle.

    The rule integrates polynomials of total degree ``degree`` exactly.
    Symmetric Gauss rules are used where available (degrees 1, 2, 4, 5),
    collapsed product rules otherwise.
    """
    if degree < 1:
        raise ValueError("quadrature degree must be >= 1")
    if degree == 3:
        degree = 4
    if degree in _SYMMETRIC:
        pts, wts = _symmetric_rule(degree)
    else:
        pts, wts = _conical_rule(degree)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def gauss_segment(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


# --- Sauter-Schwab rules ----------------------------------------------------
#
# Each rule returns arrays (x, y, w): x and y of shape (m, 2) on the
# Sauter-Schwab reference triangle and w of shape (m,), such that
#   sum(w * k(x, y)) ~ int_T int_T k(x, y) dy dx.
# For the edge rule the shared edge is {(u, 0)} in both triangles; for the
# vertex rule the shared vertex is the origin.


def _hypercube(order):
    g, w = gauss_segment(order)
    grids = np.meshgrid(g, g, g, g, indexing="ij")
    wgrid = np.meshgrid(w, w, w, w, indexing="ij")
    xi, e1, e2, e3 = (a.ravel() for a in grids)
    wt = np.prod([a.ravel() for a in wgrid], axis=0)
    return xi, e1, e2, e3, wt


def _stack(maps, xi, wt, jac):
    xs, ys, ws = [], [], []
    for (x1, x2, y1, y2), j in zip(maps, jac):
        xs.append(np.column_stack([xi * x1, xi * x2]))
        ys.append(np.column_stack([xi * y1, xi * y2]))
        ws.append(wt * j)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    for a in (x, y, w):
        a.setflags(write=False)
    return x, y, w


@lru_cache(maxsize=None)
def coincident_rule(order):
    xi, e1, e2, e3, wt = _hypercube(order)
    jac = xi**3 * e1**2 * e2
    maps = [
        (np.ones_like(xi), 1 - e1 + e1 * e2, 1 - e1 * e2 * e3, 1 - e1),
        (1 - e1 * e2 * e3, 1 - e1, np.ones_like(xi), 1 - e1 + e1 * e2),
        (np.ones_like(xi), e1 * (1 - e2 + e2 * e3), 1 - e1 * e2, e1 * (1 - e2)),
        (1 - e1 * e2, e1 * (1 - e2), np.ones_like(xi), e1 * (1 - e2 + e2 * e3)),
        (1 - e1 * e2 * e3, e1 * (1 - e2 * e3), np.ones_like(xi), e1 * (1 - e2)),
        (np.ones_like(xi), e1 * (1 - e2), 1 - e1 * e2 * e3, e1 * (1 - e2 * e3)),
    ]
    return _stack(maps, xi, wt, [jac] * 6)


@lru_cache(maxsize=None)
def edge_rule(order):
    xi, e1, e2, e3, wt = _hypercube(order)
    one = np.ones_like(xi)
    j1 = xi**3 * e1**2
    j2 = xi**3 * e1**2 * e2
    maps = [
        (one, e1 * e3, 1 - e1 * e2, e1 * (1 - e2)),
        (one, e1, 1 - e1 * e2 * e3, e1 * e2 * (1 - e3)),
        (1 - e1 * e2, e1 * (1 - e2), one, e1 * e2 * e3),
        (1 - e1 * e2 * e3, e1 * e2 * (1 - e3), one, e1),
        (1 - e1 * e2 * e3, e1 * (1 - e2 * e3), one, e1 * e2),
    ]
    return _stack(maps, xi, wt, [j1, j2, j2, j2, j2])


@lru_cache(maxsize=None)
def vertex_rule(order):
    xi, e1, e2, e3, wt = _hypercube(order)
    one = np.ones_like(xi)
    jac = xi**3 * e2
    maps = [
        (one, e1, e2, e2 * e3),
        (e2, e2 * e3, one, e1),
    ]
    return _stack(maps, xi, wt, [jac, jac])
