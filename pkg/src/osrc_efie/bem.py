"""Dense Galerkin boundary operators, plane-wave data and far fields.

The unknown of the direct formulation is expanded in RWG functions and all
operators are tested with SNC functions in the L2 pairing, i.e. in the
self-dual pairing <u, v>_x = int u . (nu x v) against RWG functions.
"""

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .quadrature import coincident_rule, edge_rule, gauss_segment, triangle_rule, vertex_rule
from .spaces import element_geometry

EFIE_S = "EFIE_S"
MFIE_C = "MFIE_C"


@dataclass(frozen=True)
class QuadratureOptions:
    regular_order: int = 4
    near_order: int = 8
    singular_order: int = 5
    near_factor: float = 2.5


@dataclass
class DenseBemMatrix:
    matrix: np.ndarray
    operator: str
    kappa: float
    assembly_time: float = 0.0

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(frozen=True)
class PlaneWave:
    polarization: np.ndarray
    direction: np.ndarray
    kappa: float

    def __post_init__(self):
        p = np.asarray(self.polarization, dtype=complex)
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or p.shape != (3,):
            raise ValueError("polarization and direction must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-10:
            raise ValueError("direction must be a unit vector")
        if abs(np.dot(p, d)) > 1e-10 * max(1.0, np.linalg.norm(p)):
            raise ValueError("polarization must be orthogonal to the direction")
        object.__setattr__(self, "polarization", p)
        object.__setattr__(self, "direction", d)

    def field(self, x):
        phase = np.exp(1j * self.kappa * (np.asarray(x) @ self.direction))
        return phase[..., None] * self.polarization


@dataclass
class RhsVector:
    values: np.ndarray
    trace_coefficients: np.ndarray
    provenance: str = "direct_formulation"
    info: dict = field(default_factory=dict)


# --- pair classification and parallel scheduling -----------------------------


def _color_triangles(mesh, topo):
    """Greedy colouring so that triangles of one colour share no edge."""
    T = mesh.n_triangles
    colors = np.full(T, -1)
    for t in range(T):
        used = set()
        for e in topo.tri_edges[t]:
            for s, _ in topo.edge_to_triangles[e]:
                if colors[s] >= 0:
                    used.add(colors[s])
        c = 0
        while c in used:
            c += 1
        colors[t] = c
    order = np.argsort(colors, kind="stable")
    counts = np.bincount(colors)
    ptr = np.concatenate([[0], np.cumsum(counts)])
    return ptr.astype(np.int64), order.astype(np.int64)


def _singular_pairs(mesh):
    """Touching pairs (t <= s) with rule id and Sauter-Schwab vertex orders."""
    tri = mesh.triangles
    by_vertex = [[] for _ in range(mesh.n_vertices)]
    for t, verts in enumerate(tri):
        for v in verts:
            by_vertex[v].append(t)
    seen = set()
    pairs, perms = [], []
    for t in range(len(tri)):
        cand = sorted({s for v in tri[t] for s in by_vertex[v] if s >= t})
        for s in cand:
            if (t, s) in seen:
                continue
            seen.add((t, s))
            if s == t:
                pairs.append((t, s, 0))
                perms.append((0, 1, 2, 0, 1, 2))
                continue
            shared = [v for v in tri[t] if v in tri[s]]
            lt = [list(tri[t]).index(v) for v in shared]
            ls = [list(tri[s]).index(v) for v in shared]
            rest_t = [a for a in range(3) if a not in lt]
            rest_s = [a for a in range(3) if a not in ls]
            if len(shared) == 2:
                pairs.append((t, s, 1))
                perms.append((*lt, *rest_t, *ls, *rest_s))
            else:
                pairs.append((t, s, 2))
                perms.append((lt[0], *rest_t, ls[0], *rest_s))
    return np.array(pairs, dtype=np.int64).reshape(-1, 3), np.array(perms, dtype=np.int64).reshape(-1, 6)


def _rule_table(order):
    rules = [coincident_rule(order), edge_rule(order), vertex_rule(order)]
    xs = np.concatenate([r[0] for r in rules])
    ys = np.concatenate([r[1] for r in rules])
    ws = np.concatenate([r[2] for r in rules])
    ptr = np.concatenate([[0], np.cumsum([len(r[2]) for r in rules])]).astype(np.int64)
    return xs, ys, ws, ptr


def _physical_rule(corners, areas, degree):
    pts, wts = triangle_rule(degree)
    bary = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    x = np.einsum("qa,tak->tqk", bary, corners)
    w = 2.0 * areas[:, None] * wts[None, :]
    return np.ascontiguousarray(x), np.ascontiguousarray(w)


class _Geometry:
    def __init__(self, mesh, topo, rwg, quad):
        corners, normals, areas, lengths = element_geometry(mesh, topo)
        self.corners = np.ascontiguousarray(corners)
        self.areas = areas
        self.coef = np.ascontiguousarray(rwg.local_signs * lengths / (2.0 * areas[:, None]))
        self.dofs = np.ascontiguousarray(rwg.local_dofs)
        self.tri = np.ascontiguousarray(mesh.triangles)
        self.centroid = corners.mean(axis=1)
        self.diam = np.max(lengths, axis=1)
        self.xf, self.wf = _physical_rule(corners, areas, quad.regular_order)
        self.xn, self.wn = _physical_rule(corners, areas, quad.near_order)
        self.color_ptr, self.color_idx = _color_triangles(mesh, topo)
        self.pairs, self.perms = _singular_pairs(mesh)
        self.rules = _rule_table(quad.singular_order)
        self.n = rwg.n_dofs


def _check_spaces(mesh, rwg, snc):
    if rwg.kind != "RWG" or snc.kind != "SNC":
        raise ValueError("expected an RWG trial space and an SNC test space")
    if rwg.mesh is not mesh or snc.mesh is not mesh or rwg.n_dofs != snc.n_dofs:
        raise ValueError("spaces do not belong to the mesh")


def _assemble(kind, mesh, rwg, snc, kappa, quad):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    _check_spaces(mesh, rwg, snc)
    quad = quad or QuadratureOptions()
    start = time.perf_counter()
    g = _Geometry(mesh, rwg.topo, rwg, quad)
    out = np.zeros((g.n, g.n), dtype=np.complex128)
    kern.assemble_regular(
        kind, float(kappa), g.corners, g.coef, g.dofs, g.tri, g.centroid, g.diam,
        g.color_ptr, g.color_idx, g.xf, g.wf, g.xn, g.wn, float(quad.near_factor), out,
    )
    pairs = g.pairs
    if kind == kern.MFIE:
        # flat panels: (x - y), m and w are coplanar, the integrand vanishes
        pairs = pairs[pairs[:, 2] != 0]
        perms = g.perms[g.pairs[:, 2] != 0]
    else:
        perms = g.perms
    xs, ys, ws, ptr = g.rules
    kern.assemble_singular(
        kind, float(kappa), g.corners, g.coef, g.dofs, np.ascontiguousarray(pairs),
        np.ascontiguousarray(perms), xs, ys, ws, ptr, out,
    )
    return out, time.perf_counter() - start


def assemble_efie(mesh, rwg, snc, kappa, quad=None):
    """Galerkin matrix of the electric field operator S_kappa."""
    out, elapsed = _assemble(kern.EFIE, mesh, rwg, snc, kappa, quad)
    return DenseBemMatrix(out, EFIE_S, float(kappa), elapsed)


def assemble_mfie(mesh, rwg, snc, kappa, quad=None):
    """Galerkin matrix of the magnetic field operator C_kappa (principal
    value part only; the identity jump is the mixed mass matrix)."""
    out, elapsed = _assemble(kern.MFIE, mesh, rwg, snc, kappa, quad)
    return DenseBemMatrix(out, MFIE_C, float(kappa), elapsed)


def element_pair_block(operator, kappa, corners_test, corners_trial, quad=None, relation="auto"):
    """3x3 interaction of the unsigned local RWG functions of two triangles.

    Uses the same rule selection as the assembler: tensor rules for
    separated pairs (higher order when near), Sauter-Schwab rules when the
    triangles share vertices.
    """
    quad = quad or QuadratureOptions()
    kind = kern.EFIE if operator == EFIE_S else kern.MFIE
    P = np.ascontiguousarray(corners_test, dtype=float)
    Q = np.ascontiguousarray(corners_trial, dtype=float)

    def coef(c):
        two_a = np.linalg.norm(np.cross(c[1] - c[0], c[2] - c[0]))
        lens = np.array([np.linalg.norm(c[(a + 2) % 3] - c[(a + 1) % 3]) for a in range(3)])
        return lens / two_a, two_a / 2.0

    ct, at = coef(P)
    cs, as_ = coef(Q)
    shared = [(a, b) for a in range(3) for b in range(3) if np.allclose(P[a], Q[b], atol=1e-14)]
    if relation == "auto":
        relation = {0: "regular", 1: "vertex", 2: "edge", 3: "coincident"}[len(shared)]
    if relation == "regular":
        diam = max(np.max(ct) * 2 * at, np.max(cs) * 2 * as_)
        near = np.linalg.norm(P.mean(0) - Q.mean(0)) < quad.near_factor * diam
        deg = quad.near_order if near else quad.regular_order
        xt, wt = _physical_rule(P[None], np.array([at]), deg)
        xs_, ws_ = _physical_rule(Q[None], np.array([as_]), deg)
        X = np.repeat(xt[0], len(ws_[0]), axis=0)
        Y = np.tile(xs_[0], (len(wt[0]), 1))
        W = np.repeat(wt[0], len(ws_[0])) * np.tile(ws_[0], len(wt[0]))
    else:
        if relation == "coincident":
            rx, ry, rw = coincident_rule(quad.singular_order)
            pt, ps = [0, 1, 2], [0, 1, 2]
        elif relation == "edge":
            rx, ry, rw = edge_rule(quad.singular_order)
            pt = [shared[0][0], shared[1][0]]
            ps = [shared[0][1], shared[1][1]]
            pt.append(3 - sum(pt))
            ps.append(3 - sum(ps))
        else:
            rx, ry, rw = vertex_rule(quad.singular_order)
            pt = [shared[0][0]] + [a for a in range(3) if a != shared[0][0]]
            ps = [shared[0][1]] + [b for b in range(3) if b != shared[0][1]]
        A, B = P[pt], Q[ps]
        X = A[0] + rx[:, :1] * (A[1] - A[0]) + rx[:, 1:] * (A[2] - A[1])
        Y = B[0] + ry[:, :1] * (B[1] - B[0]) + ry[:, 1:] * (B[2] - B[1])
        W = rw * (2 * at) * (2 * as_)
    m = kern.pair_moments(kind, float(kappa), np.ascontiguousarray(X), np.ascontiguousarray(Y), W)
    return kern.pair_block(kind, float(kappa), m, P, Q, ct, cs)


# --- right-hand side and far field --------------------------------------------


def tangential_trace_coefficients(mesh, topo, rwg, field_fn, n_points=4):
    """RWG coefficients of gamma_t e = e x nu by edge-flux matching.

    The normal flux of e x nu across edge i equals the tangential component
    of e along the edge, traversed in the direction used by T+; each
    coefficient is its edge average.
    """
    g, w = gauss_segment(n_points)
    edges = topo.edges[rwg.dof_entities]
    a = mesh.vertices[edges[:, 0]]
    b = mesh.vertices[edges[:, 1]]
    x = a[:, None, :] + g[None, :, None] * (b - a)[:, None, :]
    e = field_fn(x)
    return np.einsum("q,eqk,ek->e", w, e, b - a) / np.linalg.norm(b - a, axis=1)


def assemble_rhs(mesh, snc, wave, C, mixed_mass, rwg=None):
    """Right-hand side -(M/2 + C) f of the direct EFIE."""
    rwg = rwg or snc
    f = tangential_trace_coefficients(mesh, snc.topo, rwg, wave.field)
    Cm = C.matrix if isinstance(C, DenseBemMatrix) else C
    values = -(0.5 * (mixed_mass @ f) + Cm @ f)
    return RhsVector(values, f)


def _current_at_points(mesh, topo, rwg, coeffs, degree=4):
    corners, normals, areas, lengths = element_geometry(mesh, topo)
    x, w = _physical_rule(corners, areas, degree)
    coef = rwg.local_signs * lengths / (2.0 * areas[:, None])
    c = np.where(rwg.local_dofs >= 0, np.asarray(coeffs)[np.maximum(rwg.local_dofs, 0)], 0.0)
    rel = x[:, :, None, :] - corners[:, None, :, :]
    J = np.einsum("ta,tqak->tqk", coef * c, rel)
    return x.reshape(-1, 3), w.ravel(), J.reshape(-1, 3)


def far_field(mesh, rwg, kappa, solution, directions, magnetic=None, degree=4):
    """Far-field pattern F with e_s(r d) ~ exp(ikr)/r F(d).

    The electric current ``solution`` radiates through the electric
    potential, ``ik/4pi (I - d d^T) int J exp(-ik d.y)``; an optional
    magnetic trace ``magnetic`` (RWG coefficients) adds
    ``ik/4pi d x int M exp(-ik d.y)``.
    """
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-10):
        raise ValueError("directions must be unit vectors")
    x, w, J = _current_at_points(mesh, rwg.topo, rwg, solution, degree)
    phase = np.exp(-1j * kappa * (d @ x.T)) * w[None, :]
    I = phase @ J
    F = I - d * np.einsum("dk,dk->d", d, I)[:, None]
    if magnetic is not None:
        _, _, M = _current_at_points(mesh, rwg.topo, rwg, magnetic, degree)
        F = F + np.cross(d, phase @ M)
    return 1j * kappa / (4.0 * np.pi) * F


def bistatic_rcs(F, polarization):
    """RCS = 4 pi |F|^2 / |p|^2 (area units)."""
    return 4.0 * np.pi * np.sum(np.abs(F) ** 2, axis=-1) / np.vdot(polarization, polarization).real


# --- raw dense dump ---------------------------------------------------------------

DENSE_MAGIC = b"OSRCDNS1"


def write_dense(path, matrix):
    """Row-major little-endian complex128 with a 24-byte header (magic, rows, cols)."""
    a = np.ascontiguousarray(matrix, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(DENSE_MAGIC + struct.pack("<QQ", *a.shape))
        fh.write(a.tobytes())


def read_dense(path):
    with open(path, "rb") as fh:
        head = fh.read(24)
        if len(head) != 24 or head[:8] != DENSE_MAGIC:
            raise ValueError("not a dense matrix dump")
        rows, cols = struct.unpack("<QQ", head[8:])
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != rows * cols:
        raise ValueError("truncated dense matrix dump")
    return data.reshape(rows, cols).astype(np.complex128)
