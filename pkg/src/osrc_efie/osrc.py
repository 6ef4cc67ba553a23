"""OSRC approximation of the magnetic-to-electric map as an EFIE preconditioner.

Variant "A" evaluates the Padé form of the square-root operator with one
sparse block solve per term,

    [ G - B_j N    B_j L^T ] [phi_j]   [y]
    [ L            K       ] [psi_j] = [0],

with L (vertices x edges) the pairing of P1 gradients with SNC functions.
The result is -(G - N)^-1 (R0 y - G sum_j beta_j phi_j). Variant "B" keeps
only the outer factor and returns -(G - N)^-1 y.

Eliminating psi_j gives the Schur form (G - B_j (N + L^T K^-1 L)) phi_j = y,
which is dense and only used as a test oracle here.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .pade import compute_pade

VARIANT_A = "A"
VARIANT_B = "B"
PIVOT_TOL = 1e-14


class FactorizationError(RuntimeError):
    pass


@dataclass
class ApplyTrace:
    phi_norms: list = field(default_factory=list)
    block_residuals: list = field(default_factory=list)
    outer_residual: float = 0.0


class _Factor:
    """Sparse LU with a pivot-size check."""

    def __init__(self, matrix):
        A = sp.csc_matrix(matrix, dtype=complex)
        scale = abs(A).max() if A.nnz else 0.0
        try:
            self.lu = spla.splu(A)
        except RuntimeError as exc:
            raise FactorizationError(f"sparse factorization failed: {exc}") from exc
        pivots = np.abs(self.lu.U.diagonal())
        if scale == 0.0 or pivots.min() <= PIVOT_TOL * scale:
            raise FactorizationError("matrix is numerically singular")
        self.matrix = A
        self.shape = A.shape

    def solve(self, b):
        return self.lu.solve(np.asarray(b, dtype=complex))


@dataclass
class OsrcPreconditioner:
    variant: str
    ops: object
    pade: object
    outer: _Factor
    blocks: list
    setup_time: float = 0.0

    @property
    def shape(self):
        n = self.ops.n_edges
        return (n, n)

    @property
    def n_factorizations(self):
        return len(self.blocks) + 1

    def apply(self, y, trace=None):
        """Apply to a vector (n,) or a block of columns (n, m)."""
        y = np.asarray(y, dtype=complex)
        if y.ndim not in (1, 2) or y.shape[0] != self.ops.n_edges:
            raise ValueError("vector length does not match the number of edge dofs")
        if self.variant == VARIANT_B:
            return -self.outer.solve(y)
        ne = self.ops.n_edges
        rhs = np.concatenate([y, np.zeros((self.ops.n_vertices,) + y.shape[1:], dtype=complex)])
        acc = np.zeros(y.shape, dtype=complex)
        for beta, block in zip(self.pade.beta, self.blocks):
            sol = block.solve(rhs)
            phi = sol[:ne]
            acc += beta * phi
            if trace is not None:
                trace.phi_norms.append(float(np.linalg.norm(phi)))
                res = block.matrix @ sol - rhs
                trace.block_residuals.append(float(np.linalg.norm(res) / max(np.linalg.norm(y), 1e-300)))
        w = self.pade.R0 * y - self.ops.G @ acc
        r3 = self.outer.solve(w)
        if trace is not None:
            outer_matrix = self.outer.matrix
            trace.outer_residual = float(
                np.linalg.norm(outer_matrix @ r3 - w) / max(np.linalg.norm(w), 1e-300)
            )
        return -r3

    __call__ = apply

    def matvec(self, y):
        return self.apply(y)


def block_matrix(ops, B):
    """Sparse saddle-point matrix of one Padé term."""
    return sp.bmat(
        [[ops.G - B * ops.N_eps, B * ops.L.T], [ops.L, ops.K_eps]], format="csc"
    )


def build_preconditioner(ops, pade=None, variant=VARIANT_A):
    """Factorize every sparse system the chosen variant needs."""
    variant = variant.upper()
    if variant not in (VARIANT_A, VARIANT_B):
        raise ValueError("variant must be 'A' or 'B'")
    ne, nv = ops.n_edges, ops.n_vertices
    if ops.G.shape != (ne, ne) or ops.N_eps.shape != (ne, ne) or ops.L.shape != (nv, ne):
        raise ValueError("inconsistent operator dimensions")
    if variant == VARIANT_A and pade is None:
        raise ValueError("variant A needs Padé coefficients")
    start = time.perf_counter()
    outer = _Factor(ops.G - ops.N_eps)
    blocks = []
    if variant == VARIANT_A:
        blocks = [_Factor(block_matrix(ops, B)) for B in pade.B]
    return OsrcPreconditioner(
        variant, ops, pade if variant == VARIANT_A else None, outer, blocks,
        time.perf_counter() - start,
    )


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def schur_apply_dense(ops, pade, y):
    """Variant A through explicit dense Schur complements (small meshes only)."""
    G, N, K, L = (_dense(m).astype(complex) for m in (ops.G, ops.N_eps, ops.K_eps, ops.L))
    LKL = L.T @ np.linalg.solve(K, L)
    acc = np.zeros(G.shape[0], dtype=complex)
    for beta, B in zip(pade.beta, pade.B):
        acc += beta * np.linalg.solve(G - B * (N + LKL), y)
    return -np.linalg.solve(G - N, pade.R0 * y - G @ acc)


def exact_osrc_matrix(ops):
    """Dense discrete OSRC operator with the exact matrix square root.

    With J = -G^-1 (N + L^T K^-1 L) the Padé form approximates
    -(G - N)^-1 G sqrt(I + J) G^-1, which is built here with sqrtm.
    """
    G, N, K, L = (_dense(m).astype(complex) for m in (ops.G, ops.N_eps, ops.K_eps, ops.L))
    J = -np.linalg.solve(G, N + L.T @ np.linalg.solve(K, L))
    root = sla.sqrtm(np.eye(len(G)) + J)
    return -np.linalg.solve(G - N, G @ root @ np.linalg.inv(G))


def osrc_from_mesh(mesh, topo, kappa, variant=VARIANT_A, n_terms=2, alpha=np.pi / 2,
                   curvature=None, order=4, per_element=False):
    """Convenience: curvature, damping, sparse operators and factorizations."""
    from .mesh import estimate_curvature
    from .sparse_ops import assemble_sparse_set, build_damped_wavenumber
    from .spaces import build_space

    start = time.perf_counter()
    curvature = curvature or estimate_curvature(mesh, topo=topo)
    kw = build_damped_wavenumber(kappa, curvature)
    snc = build_space(mesh, topo, "SNC")
    p1 = build_space(mesh, topo, "P1")
    ops = assemble_sparse_set(mesh, topo, snc, p1, kw, order=order, per_element=per_element)
    pade = compute_pade(n_terms, alpha) if variant.upper() == VARIANT_A else None
    pre = build_preconditioner(ops, pade, variant)
    pre.setup_time = time.perf_counter() - start
    return pre
