"""Triangulated surfaces: loading, orientation, edge topology, curvature."""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for unreadable, non-manifold or non-orientable meshes."""


@dataclass(frozen=True)
class TriangleMesh:
    """Oriented surface triangulation.

    ``triangles`` holds vertex indices in counter-clockwise order as seen
    from the side the unit normal points to. On closed meshes the normals
    point outward.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def corners(self):
        """Array of shape (T, 3, 3): vertex coordinates per triangle."""
        return self.vertices[self.triangles]

    def normals_and_areas(self):
        p = self.corners()
        cr = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        two_area = np.linalg.norm(cr, axis=1)
        return cr / two_area[:, None], 0.5 * two_area

    def scaled(self, factor):
        return TriangleMesh(self.vertices * factor, self.triangles.copy())


@dataclass(frozen=True)
class EdgeTopology:
    """Edge incidence of a mesh.

    ``edges[e]`` is the sorted vertex pair of edge ``e``; the stored
    direction runs from the smaller to the larger index. ``tri_edges[t, a]``
    is the edge opposite local vertex ``a`` of triangle ``t`` and
    ``tri_edge_signs[t, a]`` is +1 when ``t`` traverses that edge in its
    stored direction (``t`` is then the T+ triangle of the edge).
    """

    edges: np.ndarray
    edge_to_triangles: tuple
    boundary: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def is_closed(self):
        return not self.boundary.any()

    def plus_minus(self, e):
        """Return ``(t_plus, t_minus)`` for edge ``e``; ``t_minus`` is -1 on the boundary."""
        tp, tm = -1, -1
        for t, a in self.edge_to_triangles[e]:
            if self.tri_edge_signs[t, a] > 0:
                tp = t
            else:
                tm = t
        return tp, tm


@dataclass(frozen=True)
class CurvatureField:
    radius_per_vertex: np.ndarray
    global_override: float | None = None

    def __post_init__(self):
        r = self.radius_per_vertex
        if not (np.all(np.isfinite(r)) and np.all(r > 0)):
            raise ValueError("curvature radii must be positive and finite")


@dataclass(frozen=True)
class MeshStats:
    h: float
    n_vertices: int
    n_edges: int
    n_triangles: int
    total_area: float
    extra: dict = field(default_factory=dict)


# --- construction and validation ----------------------------------------------


def _directed_edges(triangles):
    t = triangles
    return np.stack(
        [
            np.column_stack([t[:, 1], t[:, 2]]),
            np.column_stack([t[:, 2], t[:, 0]]),
            np.column_stack([t[:, 0], t[:, 1]]),
        ],
        axis=1,
    )


def _edge_map(triangles):
    """Map sorted vertex pair -> list of (triangle, local edge)."""
    emap = {}
    de = _directed_edges(triangles)
    for t in range(len(triangles)):
        for a in range(3):
            i, j = de[t, a]
            key = (i, j) if i < j else (j, i)
            emap.setdefault(key, []).append((t, a))
    for key, inc in emap.items():
        if len(inc) > 2:
            raise MeshError(f"non-manifold edge {key} shared by {len(inc)} triangles")
    return emap


def _orient(vertices, triangles):
    """Make windings consistent by breadth-first propagation, outward if closed."""
    tris = triangles.copy()
    emap = _edge_map(tris)
    neighbours = [[] for _ in range(len(tris))]
    for inc in emap.values():
        if len(inc) == 2:
            (t0, _), (t1, _) = inc
            neighbours[t0].append(t1)
            neighbours[t1].append(t0)

    def traverses(t, i, j):
        v = tris[t]
        return any(v[k] == i and v[(k + 1) % 3] == j for k in range(3))

    def shared(t0, t1):
        s = set(tris[t0]) & set(tris[t1])
        return tuple(s)

    visited = np.zeros(len(tris), dtype=bool)
    components = []
    for seed in range(len(tris)):
        if visited[seed]:
            continue
        visited[seed] = True
        comp = [seed]
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for n in neighbours[t]:
                i, j = shared(t, n)
                same = traverses(t, i, j) == traverses(n, i, j)
                if not visited[n]:
                    if same:
                        tris[n] = tris[n][[0, 2, 1]]
                    visited[n] = True
                    comp.append(n)
                    queue.append(n)
                elif same:
                    raise MeshError("surface is not orientable")
        components.append(np.array(comp))

    # Closed components: make normals point outward (positive enclosed volume).
    emap = _edge_map(tris)
    closed_tri = np.ones(len(tris), dtype=bool)
    for inc in emap.values():
        if len(inc) == 1:
            closed_tri[inc[0][0]] = False
    for comp in components:
        if not closed_tri[comp].all():
            continue
        p = vertices[tris[comp]]
        vol = np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0
        if vol < 0:
            tris[comp] = tris[comp][:, [0, 2, 1]]
    return tris


def make_mesh(vertices, triangles, *, area_tol=1e-12):
    """Validate raw arrays and return an oriented :class:`TriangleMesh`."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != 3:
        raise MeshError("vertices must have shape (n, 3)")
    if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
        raise MeshError("triangles must have shape (m, 3) with m > 0")
    if t.min() < 0 or t.max() >= len(v):
        raise MeshError("triangle references a vertex index out of range")
    diag2 = float(np.sum((v.max(axis=0) - v.min(axis=0)) ** 2))
    p = v[t]
    two_area = np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    if np.any(0.5 * two_area <= area_tol * diag2):
        raise MeshError("degenerate (zero-area) triangle")
    return TriangleMesh(v, _orient(v, t))


def _read_off(text):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or not tokens[0][0].endswith("OFF"):
        raise MeshError("missing OFF header")
    head = tokens[0][1:] or tokens[1]
    body = tokens[1:] if tokens[0][1:] else tokens[2:]
    nv, nf = int(head[0]), int(head[1])
    if len(body) < nv + nf:
        raise MeshError("OFF file truncated")
    verts = np.array([[float(x) for x in row[:3]] for row in body[:nv]])
    tris = []
    for row in body[nv : nv + nf]:
        k = int(row[0])
        idx = [int(x) for x in row[1 : 1 + k]]
        if len(idx) != k or k < 3:
            raise MeshError("malformed OFF face")
        for i in range(1, k - 1):  # fan-triangulate polygons
            tris.append((idx[0], idx[i], idx[i + 1]))
    return verts, np.array(tris, dtype=np.int64)


def _read_gmsh2(text):
    lines = [ln.strip() for ln in text.splitlines()]

    def section(name):
        try:
            start = lines.index(f"${name}")
            end = lines.index(f"$End{name}", start)
        except ValueError:
            raise MeshError(f"missing ${name} section") from None
        return lines[start + 1 : end]

    fmt = section("MeshFormat")
    if not fmt or not fmt[0].startswith("2"):
        raise MeshError("only Gmsh ASCII format version 2 is supported")
    nodes = section("Nodes")
    n = int(nodes[0])
    ids, coords = [], []
    for ln in nodes[1 : 1 + n]:
        parts = ln.split()
        ids.append(int(parts[0]))
        coords.append([float(x) for x in parts[1:4]])
    index = {tag: i for i, tag in enumerate(ids)}
    elems = section("Elements")
    tris = []
    for ln in elems[1 : 1 + int(elems[0])]:
        parts = [int(x) for x in ln.split()]
        if parts[1] != 2:
            continue
        ntags = parts[2]
        node_tags = parts[3 + ntags : 6 + ntags]
        try:
            tris.append([index[x] for x in node_tags])
        except KeyError:
            raise MeshError("element references an unknown node") from None
    if not tris:
        raise MeshError("no triangle elements (type 2) found")
    return np.array(coords), np.array(tris, dtype=np.int64)


def load_mesh(path, format=None):
    """Read a Gmsh ASCII v2 (``.msh``) or OFF (``.off``) surface mesh."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mesh file not found: {path}")
    if format is None:
        format = "gmsh-ascii" if path.suffix.lower() == ".msh" else "off"
    text = path.read_text()
    try:
        if format == "off":
            v, t = _read_off(text)
        elif format == "gmsh-ascii":
            v, t = _read_gmsh2(text)
        else:
            raise MeshError(f"unknown mesh format {format!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"cannot parse {path}: {exc}") from exc
    return make_mesh(v, t)


def build_edge_topology(mesh):
    emap = _edge_map(mesh.triangles)
    keys = sorted(emap)
    edges = np.array(keys, dtype=np.int64).reshape(-1, 2)
    tri_edges = np.empty((mesh.n_triangles, 3), dtype=np.int64)
    signs = np.empty((mesh.n_triangles, 3), dtype=np.int64)
    de = _directed_edges(mesh.triangles)
    incidence = []
    for e, key in enumerate(keys):
        inc = tuple(emap[key])
        incidence.append(inc)
        for t, a in inc:
            tri_edges[t, a] = e
            signs[t, a] = 1 if de[t, a, 0] == key[0] else -1
    boundary = np.array([len(inc) == 1 for inc in incidence])
    for a in (edges, tri_edges, signs, boundary):
        a.setflags(write=False)
    return EdgeTopology(edges, tuple(incidence), boundary, tri_edges, signs)


def mesh_stats(mesh, topo=None):
    topo = topo or build_edge_topology(mesh)
    v = mesh.vertices
    lengths = np.linalg.norm(v[topo.edges[:, 1]] - v[topo.edges[:, 0]], axis=1)
    _, areas = mesh.normals_and_areas()
    return MeshStats(
        h=float(lengths.max()),
        n_vertices=mesh.n_vertices,
        n_edges=topo.n_edges,
        n_triangles=mesh.n_triangles,
        total_area=float(areas.sum()),
        extra={"h_mean": float(lengths.mean()), "closed": topo.is_closed},
    )


def estimate_curvature(mesh, override=None, topo=None):
    """Per-vertex curvature radius.

    With ``override`` every radius equals it. Otherwise the radius is
    ``1 / max(|H|, 1e-3 / h)`` with the mean curvature ``H`` from the
    cotangent Laplacian of the vertex positions (mixed Voronoi areas).
    Boundary vertices get the floor value.
    """
    n = mesh.n_vertices
    if override is not None:
        if not override > 0:
            raise ValueError("curvature override must be positive")
        return CurvatureField(np.full(n, float(override)), float(override))

    topo = topo or build_edge_topology(mesh)
    h = mesh_stats(mesh, topo).h
    p = mesh.corners()
    tri = mesh.triangles
    lap = np.zeros((n, 3))
    area = np.zeros(n)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        u = p[:, b] - p[:, a]
        w = p[:, c] - p[:, a]
        cr = np.linalg.norm(np.cross(u, w), axis=1)
        cot = np.einsum("ij,ij->i", u, w) / cr
        # the angle at a weighs the opposite edge (b, c)
        d = p[:, c] - p[:, b]
        np.add.at(lap, tri[:, b], cot[:, None] * d)
        np.add.at(lap, tri[:, c], -cot[:, None] * d)

    # Mixed Voronoi areas (Meyer et al.).
    e = [p[:, (a + 2) % 3] - p[:, (a + 1) % 3] for a in range(3)]
    sq = np.stack([np.einsum("ij,ij->i", x, x) for x in e], axis=1)
    tarea = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    cots = np.empty((len(tri), 3))
    for a in range(3):
        u = p[:, (a + 1) % 3] - p[:, a]
        w = p[:, (a + 2) % 3] - p[:, a]
        cots[:, a] = np.einsum("ij,ij->i", u, w) / (2.0 * tarea)
    obtuse = cots < 0
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        vor = (sq[:, b] * cots[:, b] + sq[:, c] * cots[:, c]) / 8.0
        any_obtuse = obtuse.any(axis=1)
        contrib = np.where(
            any_obtuse, np.where(obtuse[:, a], tarea / 2.0, tarea / 4.0), vor
        )
        np.add.at(area, tri[:, a], contrib)

    mean_curv = np.linalg.norm(lap, axis=1) / (4.0 * area)
    on_boundary = np.zeros(n, dtype=bool)
    on_boundary[topo.edges[topo.boundary].ravel()] = True
    mean_curv[on_boundary] = 0.0
    floor = 1e-3 / h
    return CurvatureField(1.0 / np.maximum(mean_curv, floor))


# --- built-in geometry -------------------------------------------------------


def icosahedron(radius=1.0):
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    t = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    v *= radius / np.linalg.norm(v[0])
    return v, t


def sphere_mesh(radius=1.0, frequency=1):
    """Geodesic sphere: each icosahedron face split into ``frequency**2``
    triangles, vertices projected to the sphere.

    Gives ``30 * frequency**2`` edges; frequency ``2**L`` reproduces ``L``
    levels of recursive midpoint subdivision.
    """
    if frequency < 1:
        raise ValueError("frequency must be >= 1")
    v0, t0 = icosahedron(1.0)
    n = frequency
    index = {}
    verts = []

    def vid(point):
        key = tuple(np.round(point, 9))
        if key not in index:
            index[key] = len(verts)
            verts.append(point)
        return index[key]

    tris = []
    for a, b, c in t0:
        A, B, C = v0[a], v0[b], v0[c]
        ids = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                ids[i, j] = vid(A + (i / n) * (B - A) + (j / n) * (C - A))
        for i in range(n):
            for j in range(n - i):
                tris.append((ids[i, j], ids[i + 1, j], ids[i, j + 1]))
                if i + j < n - 1:
                    tris.append((ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]))
    verts = np.array(verts)
    verts *= radius / np.linalg.norm(verts, axis=1)[:, None]
    return make_mesh(verts, np.array(tris))


def sphere_frequency_for_h(h, radius=1.0):
    """Smallest geodesic frequency whose maximum edge length is <= ``h``."""
    n = 1
    while True:
        m = sphere_mesh(radius, n)
        if mesh_stats(m).h <= h:
            return n
        n += 1
