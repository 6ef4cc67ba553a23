"""GMRES with left preconditioning and dense spectra of small operators."""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

BREAKDOWN_TOL = 1e-14


def as_operator(op, shape=None):
    """Wrap a matrix, a DenseBemMatrix, a preconditioner or a callable."""
    if isinstance(op, spla.LinearOperator):
        return op
    if hasattr(op, "matrix"):
        op = op.matrix
    if hasattr(op, "apply") and hasattr(op, "shape"):
        return spla.LinearOperator(op.shape, matvec=op.apply, matmat=op.apply, dtype=complex)
    if callable(op) and not hasattr(op, "shape"):
        if shape is None:
            raise ValueError("a callable operator needs an explicit shape")
        return spla.LinearOperator(shape, matvec=op, dtype=complex)
    return spla.aslinearoperator(op)


def compose(*ops):
    """Product operator ops[0] @ ops[1] @ ... (the rightmost applies first)."""
    ops = [as_operator(o) for o in ops]
    out = ops[0]
    for o in ops[1:]:
        if out.shape[1] != o.shape[0]:
            raise ValueError("operator dimensions do not chain")
        out = out @ o
    return out


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    breakdown: bool = False

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else np.nan


def gmres(op, rhs, tol=1e-5, maxit=None, restart=None, precond=None, x0=None):
    """Solve ``op x = rhs`` by GMRES (modified Gram-Schmidt Arnoldi).

    With ``precond`` the left-preconditioned system precond(op x) =
    precond(rhs) is solved and residuals are those of that system.
    ``residual_history[0]`` is the initial relative residual; entry i is
    the residual after i iterations. Without ``restart`` the Krylov basis
    grows up to ``maxit`` vectors.
    """
    t0 = time.perf_counter()
    A = as_operator(op)
    n = A.shape[0]
    b = np.asarray(rhs, dtype=complex)
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError("operator and right-hand side dimensions disagree")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    M = as_operator(precond) if precond is not None else None

    def apply(v):
        w = A.matvec(v)
        return M.matvec(w) if M is not None else w

    maxit = n if maxit is None else int(maxit)
    cycle = maxit if restart is None else max(1, int(restart))
    pb = M.matvec(b) if M is not None else b.copy()
    bnorm = np.linalg.norm(pb)
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    report = SolveReport()
    if bnorm == 0.0:
        report.residual_history = [0.0]
        report.converged = True
        report.wall_time = time.perf_counter() - t0
        return np.zeros(n, dtype=complex), report

    r = pb - apply(x) if np.any(x) else pb.copy()
    beta = np.linalg.norm(r)
    report.residual_history.append(beta / bnorm)
    while report.iterations < maxit and beta / bnorm > tol:
        m = min(cycle, maxit - report.iterations)
        V = np.zeros((m + 1, n), dtype=complex)
        H = np.zeros((m + 1, m), dtype=complex)
        cs = np.zeros(m, dtype=complex)
        sn = np.zeros(m, dtype=complex)
        g = np.zeros(m + 1, dtype=complex)
        V[0] = r / beta
        g[0] = beta
        k_used = 0
        for k in range(m):
            w = apply(V[k])
            wnorm = np.linalg.norm(w)
            for i in range(k + 1):
                H[i, k] = np.vdot(V[i], w)
                w -= H[i, k] * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            lucky = H[k + 1, k] <= BREAKDOWN_TOL * max(wnorm, 1e-300)
            if not lucky:
                V[k + 1] = w / H[k + 1, k]
            for i in range(k):
                tmp = np.conj(cs[i]) * H[i, k] + np.conj(sn[i]) * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = tmp
            denom = np.hypot(abs(H[k, k]), abs(H[k + 1, k]))
            cs[k] = H[k, k] / denom if denom else 1.0
            sn[k] = H[k + 1, k] / denom if denom else 0.0
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = np.conj(cs[k]) * g[k]
            k_used = k + 1
            report.iterations += 1
            report.residual_history.append(abs(g[k + 1]) / bnorm)
            if lucky:
                report.breakdown = True
                break
            if abs(g[k + 1]) / bnorm <= tol:
                break
        y = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used]) if k_used else np.zeros(0)
        x = x + V[:k_used].T @ y
        if report.breakdown:
            break
        r = pb - apply(x)
        beta = np.linalg.norm(r)
    report.converged = report.residual_history[-1] <= tol
    report.wall_time = time.perf_counter() - t0
    return x, report


def materialize(op, max_dim=500):
    A = as_operator(op)
    n = A.shape[1]
    if n > max_dim:
        raise ValueError(f"operator dimension {n} exceeds the dense limit {max_dim}")
    return A.matmat(np.eye(n, dtype=complex))


def dense_spectrum(op, max_dim=500):
    """Eigenvalues of a small operator, sorted by real part."""
    ev = np.linalg.eigvals(materialize(op, max_dim))
    return ev[np.lexsort((ev.imag, ev.real))]
