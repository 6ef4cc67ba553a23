"""RWG, SNC and P1 degree-of-freedom maps and reference-element evaluation.

RWG_i = l_i RT_i is the div-conforming edge function; SNC_i = nu x RWG_i is
its curl-conforming rotation. Since SNC_i x nu = RWG_i, the isomorphism
between the two trace spaces is the identity on coefficient vectors. The
unscaled RT/NC pair differs only by the diagonal scaling l_i and is not
provided separately.
"""

from dataclasses import dataclass

import numpy as np

RWG = "RWG"
SNC = "SNC"
P1 = "P1"


@dataclass(frozen=True)
class DofSpace:
    """Global numbering of a finite element space.

    ``local_dofs[t, a]`` is the global dof of local function ``a`` on
    triangle ``t`` (-1 if unsupported) and ``local_signs[t, a]`` its sign.
    For edge spaces local function ``a`` lives on the edge opposite local
    vertex ``a``; for P1 it is the hat function of local vertex ``a``.
    """

    kind: str
    n_dofs: int
    dof_entities: np.ndarray
    local_dofs: np.ndarray
    local_signs: np.ndarray
    mesh: object
    topo: object


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray
    surface_div: np.ndarray | None = None
    surface_curl: np.ndarray | None = None
    surface_grad: np.ndarray | None = None


def build_space(mesh, topo, kind):
    kind = kind.upper()
    if kind == P1:
        ents = np.arange(mesh.n_vertices)
        local = mesh.triangles.copy()
        signs = np.ones(local.shape)
    elif kind in (RWG, SNC):
        interior = ~topo.boundary
        ents = np.flatnonzero(interior)
        numbering = np.full(topo.n_edges, -1, dtype=np.int64)
        numbering[ents] = np.arange(len(ents))
        local = numbering[topo.tri_edges]
        signs = np.where(local >= 0, topo.tri_edge_signs, 0).astype(float)
    else:
        raise ValueError(f"unknown space kind {kind!r}")
    for a in (ents, local, signs):
        a.setflags(write=False)
    return DofSpace(kind, len(ents), ents, local, signs, mesh, topo)


def element_geometry(mesh, topo):
    """Per-triangle quantities shared by all edge-function evaluations.

    Returns corners (T,3,3), unit normals (T,3), areas (T,), edge lengths
    (T,3) with ``lengths[t, a]`` the length of the edge opposite vertex a.
    """
    p = mesh.corners()
    normals, areas = mesh.normals_and_areas()
    lengths = np.stack(
        [np.linalg.norm(p[:, (a + 2) % 3] - p[:, (a + 1) % 3], axis=1) for a in range(3)],
        axis=1,
    )
    return p, normals, areas, lengths


def _tangent_frame(normal):
    e1 = np.cross(normal, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(normal, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(normal, e1)


def _linear_field_derivatives(field, p, normal):
    """Surface divergence and curl of an affine tangential field on a flat
    triangle, from its values at the three corners."""
    e1, e2 = _tangent_frame(normal)
    # corner coordinates and field components in the tangent frame
    X = np.array([[np.dot(q - p[0], e1), np.dot(q - p[0], e2)] for q in p])
    F = np.array([[np.dot(f, e1), np.dot(f, e2)] for f in field])
    M = np.column_stack([X[1] - X[0], X[2] - X[0]])
    dF = np.column_stack([F[1] - F[0], F[2] - F[0]]) @ np.linalg.inv(M)
    return dF[0, 0] + dF[1, 1], dF[1, 0] - dF[0, 1]


def evaluate_basis(space, element, ref_point):
    """Evaluate the local basis functions of ``space`` on one triangle.

    ``ref_point`` is a barycentric triple. Values are returned in physical
    coordinates and already carry the global sign; functions whose dof is
    not supported on the element are zero.
    """
    lam = np.asarray(ref_point, dtype=float)
    if lam.shape != (3,) or np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("ref_point must be barycentric coordinates in the triangle")
    mesh = space.mesh
    p = mesh.vertices[mesh.triangles[element]]
    cr = np.cross(p[1] - p[0], p[2] - p[0])
    area = 0.5 * np.linalg.norm(cr)
    nu = cr / (2.0 * area)

    if space.kind == P1:
        grads = np.array(
            [np.cross(nu, p[(a + 2) % 3] - p[(a + 1) % 3]) / (2.0 * area) for a in range(3)]
        )
        return BasisEval(values=lam.copy(), surface_grad=grads)

    x = lam @ p
    signs = space.local_signs[element]
    lengths = np.array([np.linalg.norm(p[(a + 2) % 3] - p[(a + 1) % 3]) for a in range(3)])

    def rwg(point):
        return (signs * lengths / (2.0 * area))[:, None] * (point[None, :] - p)

    values = rwg(x)
    corner_vals = [rwg(q) for q in p]
    if space.kind == RWG:
        div = np.array(
            [_linear_field_derivatives([cv[a] for cv in corner_vals], p, nu)[0] for a in range(3)]
        )
        return BasisEval(values=values, surface_div=div)
    snc_corner = [np.cross(nu, cv) for cv in corner_vals]
    curl = np.array(
        [_linear_field_derivatives([sc[a] for sc in snc_corner], p, nu)[1] for a in range(3)]
    )
    return BasisEval(values=np.cross(nu, values), surface_curl=curl)
