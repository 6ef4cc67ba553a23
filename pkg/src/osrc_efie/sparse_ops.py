"""Sparse surface-operator matrices for the OSRC preconditioner.

With t, r SNC functions and l, m P1 functions:

    G     = int t . r
    N_eps = int kappa_eps^-2 curl t curl r
    K_eps = int kappa_eps^2 l m
    L     = int Grad l . t          (rows: vertices, columns: edge dofs)

kappa_eps = kappa + i eps is evaluated at quadrature points, with eps
interpolated from its per-vertex values (or averaged per element).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import triangle_rule
from .spaces import element_geometry

EPS_COEFF = 0.39


@dataclass(frozen=True)
class DampedWavenumber:
    kappa: float
    epsilon: np.ndarray  # per vertex

    def at(self, mesh, bary, per_element=False):
        """kappa_eps at barycentric points ``bary`` (q, 3) of every triangle: (T, q)."""
        eps_v = self.epsilon[mesh.triangles]  # (T, 3)
        if per_element:
            eps = np.repeat(eps_v.mean(axis=1, keepdims=True), len(bary), axis=1)
        else:
            eps = eps_v @ np.asarray(bary).T
        return self.kappa + 1j * eps


@dataclass(frozen=True)
class SparseOperatorSet:
    G: sp.csr_matrix
    N_eps: sp.csr_matrix
    K_eps: sp.csr_matrix
    L: sp.csr_matrix

    @property
    def n_edges(self):
        return self.G.shape[0]

    @property
    def n_vertices(self):
        return self.K_eps.shape[0]


def damping_parameter(kappa, radius):
    """Optimal damping eps = 0.39 kappa^(1/3) R^(-2/3)."""
    return EPS_COEFF * np.cbrt(kappa) * np.asarray(radius, dtype=float) ** (-2.0 / 3.0)


def build_damped_wavenumber(kappa, curvature):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    eps = damping_parameter(kappa, curvature.radius_per_vertex)
    eps.setflags(write=False)
    return DampedWavenumber(float(kappa), eps)


def _bary(points):
    pts = np.asarray(points)
    return np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])


def _snc_at_points(corners, normals, areas, lengths, signs, bary):
    """SNC values (T, q, 3 local, 3 xyz) and curls (T, 3)."""
    x = np.einsum("qa,tak->tqk", bary, corners)
    coef = signs * lengths / (2.0 * areas[:, None])  # (T, 3)
    rel = x[:, :, None, :] - corners[:, None, :, :]  # (T, q, 3, 3)
    rwg = coef[:, None, :, None] * rel
    snc = np.cross(normals[:, None, None, :], rwg)
    curl = signs * lengths / areas[:, None]
    return snc, curl


def _scatter(rows, cols, vals, shape):
    m = sp.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()
    m.sum_duplicates()
    return m


def _edge_pairs(space):
    d = space.local_dofs
    rows = np.repeat(d[:, :, None], 3, axis=2)
    cols = np.repeat(d[:, None, :], 3, axis=1)
    mask = (rows >= 0) & (cols >= 0)
    return rows, cols, mask


def _check(mesh, *spaces):
    for s in spaces:
        if s.mesh is not mesh or s.local_dofs.shape[0] != mesh.n_triangles:
            raise ValueError("space was built on a different mesh")


def assemble_sparse_set(mesh, topo, snc, p1, kw, *, order=4, per_element=False):
    """Assemble G, N_eps, K_eps and L with a degree-``order`` triangle rule."""
    _check(mesh, snc, p1)
    pts, wts = triangle_rule(order)
    bary = _bary(pts)
    corners, normals, areas, lengths = element_geometry(mesh, topo)
    jw = 2.0 * areas[:, None] * wts[None, :]  # (T, q)
    signs = snc.local_signs
    snc_vals, curl = _snc_at_points(corners, normals, areas, lengths, signs, bary)
    keps = kw.at(mesh, bary, per_element)  # (T, q)

    ne, nv = snc.n_dofs, p1.n_dofs
    rows, cols, mask = _edge_pairs(snc)

    g_loc = np.einsum("tq,tqak,tqbk->tab", jw, snc_vals, snc_vals)
    n_loc = np.einsum("tq,ta,tb->tab", jw / keps**2, curl, curl)
    G = _scatter(rows[mask], cols[mask], g_loc[mask], (ne, ne))
    N = _scatter(rows[mask], cols[mask], n_loc[mask], (ne, ne))

    pv = p1.local_dofs
    k_loc = np.einsum("tq,qa,qb->tab", jw * keps**2, bary, bary)
    K = _scatter(
        np.repeat(pv[:, :, None], 3, 2), np.repeat(pv[:, None, :], 3, 1), k_loc, (nv, nv)
    )

    grads = np.stack(
        [
            np.cross(normals, corners[:, (a + 2) % 3] - corners[:, (a + 1) % 3])
            / (2.0 * areas[:, None])
            for a in range(3)
        ],
        axis=1,
    )  # (T, 3 vertices, 3 xyz)
    l_loc = np.einsum("tq,tvk,tqek->tev", jw, grads, snc_vals)  # (T, edge, vertex)
    erow = np.repeat(snc.local_dofs[:, :, None], 3, axis=2)
    vcol = np.repeat(pv[:, None, :], 3, axis=1)
    lmask = erow >= 0
    L = _scatter(vcol[lmask], erow[lmask], l_loc[lmask], (nv, ne))
    return SparseOperatorSet(G, N, K, L)


def p1_mass_matrix(mesh, p1, order=4):
    pts, wts = triangle_rule(order)
    bary = _bary(pts)
    _, areas = mesh.normals_and_areas()
    loc = np.einsum("t,q,qa,qb->tab", 2.0 * areas, wts, bary, bary)
    pv = p1.local_dofs
    return _scatter(
        np.repeat(pv[:, :, None], 3, 2), np.repeat(pv[:, None, :], 3, 1), loc,
        (p1.n_dofs, p1.n_dofs),
    )


def mixed_mass_matrix(mesh, topo, rwg, order=4):
    """Pairing of RWG trial functions with SNC test functions.

    Entry (j, i) is int RWG_i . SNC_j; the matrix is real antisymmetric.
    """
    pts, wts = triangle_rule(order)
    bary = _bary(pts)
    corners, normals, areas, lengths = element_geometry(mesh, topo)
    snc_vals, _ = _snc_at_points(corners, normals, areas, lengths, rwg.local_signs, bary)
    coef = rwg.local_signs * lengths / (2.0 * areas[:, None])
    x = np.einsum("qa,tak->tqk", bary, corners)
    rwg_vals = coef[:, None, :, None] * (x[:, :, None, :] - corners[:, None, :, :])
    jw = 2.0 * areas[:, None] * wts[None, :]
    loc = np.einsum("tq,tqak,tqbk->tab", jw, snc_vals, rwg_vals)  # (test a, trial b)
    rows, cols, mask = _edge_pairs(rwg)
    return _scatter(rows[mask], cols[mask], loc[mask], (rwg.n_dofs, rwg.n_dofs))


def rwg_mass_matrix(mesh, topo, rwg, order=4):
    """int RWG_i . RWG_j, equal to the SNC mass matrix G."""
    pts, wts = triangle_rule(order)
    bary = _bary(pts)
    corners, normals, areas, lengths = element_geometry(mesh, topo)
    coef = rwg.local_signs * lengths / (2.0 * areas[:, None])
    x = np.einsum("qa,tak->tqk", bary, corners)
    vals = coef[:, None, :, None] * (x[:, :, None, :] - corners[:, None, :, :])
    jw = 2.0 * areas[:, None] * wts[None, :]
    loc = np.einsum("tq,tqak,tqbk->tab", jw, vals, vals)
    rows, cols, mask = _edge_pairs(rwg)
    return _scatter(rows[mask], cols[mask], loc[mask], (rwg.n_dofs, rwg.n_dofs))
