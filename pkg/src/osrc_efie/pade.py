"""Rational approximation of sqrt(1 + z) with a rotated branch cut.

    sqrt(1 + z) ~ R0 - sum_j A_j / (B_j (1 + B_j z))

The real Padé coefficients a_j, b_j of the standard approximant are
rotated by an angle alpha so that the branch cut of the approximant moves
off the negative real axis.
"""

from dataclasses import dataclass

import numpy as np

POLE_TOL = 1e-14


@dataclass(frozen=True)
class PadeCoefficients:
    n_terms: int
    alpha: float
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C0: complex
    R0: complex

    @property
    def beta(self):
        """Residue weights A_j / B_j."""
        return self.A / self.B


def compute_pade(n_terms, alpha=np.pi / 2):
    if int(n_terms) != n_terms or n_terms < 1:
        raise ValueError("number of Padé terms must be a positive integer")
    n_terms = int(n_terms)
    j = np.arange(1, n_terms + 1)
    angle = j * np.pi / (2 * n_terms + 1)
    a = 2.0 / (2 * n_terms + 1) * np.sin(angle) ** 2
    b = np.cos(angle) ** 2
    rot = np.exp(-1j * alpha)
    denom = 1.0 + b * (rot - 1.0)
    A = np.exp(-0.5j * alpha) * a / denom**2
    B = b * rot / denom
    C0 = np.exp(0.5j * alpha) * (1.0 + np.sum(a * (rot - 1.0) / denom))
    R0 = C0 + np.sum(A / B)
    for arr in (a, b, A, B):
        arr.setflags(write=False)
    return PadeCoefficients(n_terms, float(alpha), a, b, A, B, complex(C0), complex(R0))


def sqrt_approx(z, coeffs):
    """Evaluate the approximant at scalar or array ``z``."""
    z = np.asarray(z, dtype=complex)
    poles = 1.0 + coeffs.B[(slice(None),) + (None,) * z.ndim] * z
    if np.any(np.abs(poles) < POLE_TOL):
        raise ZeroDivisionError("evaluation point hits a pole of the approximant")
    beta = coeffs.beta[(slice(None),) + (None,) * z.ndim]
    val = coeffs.R0 - np.sum(beta / poles, axis=0)
    return complex(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class DominantSet:
    indices: np.ndarray  # zero-based term indices
    constant: complex


def dominant_set(coeffs, tau=0.1):
    """Terms with |A_j/B_j| >= tau max|A_k/B_k| and K = 1 - sum_I beta_j / R0."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    mag = np.abs(coeffs.beta)
    idx = np.flatnonzero(mag >= tau * mag.max())
    K = 1.0 - np.sum(coeffs.beta[idx]) / coeffs.R0
    return DominantSet(idx, complex(K))
