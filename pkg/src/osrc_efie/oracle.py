"""Mie series for plane-wave scattering by a perfectly conducting sphere.

Time convention exp(-i omega t); outgoing waves behave like exp(ikr)/r.
Coefficients follow the perfectly conducting limit of the usual series:
a_n = psi_n'(x) / xi_n'(x), b_n = psi_n(x) / xi_n(x) with
psi_n = x j_n(x) and xi_n = x h_n^(1)(x).
"""

from dataclasses import dataclass

import numpy as np

E_PLANE = "E"
H_PLANE = "H"


@dataclass(frozen=True)
class MieSolution:
    kappa: float
    radius: float
    a: np.ndarray
    b: np.ndarray
    n_max: int


def truncation_order(x):
    return int(np.ceil(x + 10.0 * np.cbrt(x) + 10.0))


def riccati_bessel(n_max, x):
    """psi_n(x) and xi_n(x) for n = 0..n_max.

    j_n by downward recurrence from well above n_max, normalised with
    j_0 = sin x / x; y_n by upward recurrence, which is stable for it.
    """
    start = n_max + int(np.ceil(15 + 2 * np.sqrt(max(x, n_max))))
    j = np.zeros(start + 2)
    j[start + 1] = 0.0
    j[start] = 1e-300
    for n in range(start, 0, -1):
        j[n - 1] = (2 * n + 1) / x * j[n] - j[n + 1]
        if abs(j[n - 1]) > 1e250:
            j[n - 1 :] *= 1e-250
    # normalise against whichever of j_0, j_1 is further from a zero
    j0 = np.sin(x) / x
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    j = j[: max(n_max, 1) + 1] * (j0 / j[0] if abs(j0) > abs(j1) else j1 / j[1])
    j = j[: n_max + 1]
    y = np.empty(n_max + 1)
    y[0] = -np.cos(x) / x
    if n_max >= 1:
        y[1] = -np.cos(x) / x**2 - np.sin(x) / x
    for n in range(1, n_max):
        y[n + 1] = (2 * n + 1) / x * y[n] - y[n - 1]
    return x * j, x * (j + 1j * y)


def _derivative(f, x):
    # f_n' = f_{n-1} - n f_n / x, valid for Riccati-Bessel functions, n >= 1
    n = np.arange(1, len(f))
    return f[:-1] - n * f[1:] / x


def mie_coefficients(kappa, radius, n_max=None):
    x = float(kappa) * float(radius)
    if not x > 0:
        raise ValueError("kappa * radius must be positive")
    n_max = truncation_order(x) if n_max is None else int(n_max)
    psi, xi = riccati_bessel(n_max, x)
    a = _derivative(psi, x) / _derivative(xi, x)
    b = psi[1:] / xi[1:]
    return MieSolution(float(kappa), float(radius), a, b, n_max)


def angular_functions(n_max, mu):
    """pi_n and tau_n (n = 1..n_max) at cos(theta) = mu by upward recurrence."""
    mu = np.asarray(mu, dtype=float)
    pi = np.zeros((n_max + 1,) + mu.shape)
    tau = np.zeros_like(pi)
    pi[1] = 1.0
    tau[1] = mu
    for n in range(2, n_max + 1):
        pi[n] = (2 * n - 1) / (n - 1) * mu * pi[n - 1] - n / (n - 1) * pi[n - 2]
        tau[n] = n * mu * pi[n] - (n + 1) * pi[n - 1]
    return pi[1:], tau[1:]


def scattering_amplitudes(sol, theta):
    """S1 (perpendicular) and S2 (parallel) amplitude functions."""
    n = np.arange(1, sol.n_max + 1)
    pi, tau = angular_functions(sol.n_max, np.cos(theta))
    c = ((2 * n + 1) / (n * (n + 1)))[:, None]
    S1 = np.sum(c * (sol.a[:, None] * pi + sol.b[:, None] * tau), axis=0)
    S2 = np.sum(c * (sol.a[:, None] * tau + sol.b[:, None] * pi), axis=0)
    return S1, S2


def mie_bistatic_rcs(kappa, radius, angles, plane=E_PLANE, n_max=None):
    """Bistatic RCS over scattering angles ``angles`` (radians from forward).

    Returns (rcs, rcs_db) where rcs = 4 pi |S|^2 / kappa^2 in area units
    and rcs_db = 10 log10(rcs). In the E-plane (containing the incident
    polarisation) S = S2, in the H-plane S = S1.
    """
    sol = mie_coefficients(kappa, radius, n_max)
    theta = np.atleast_1d(np.asarray(angles, dtype=float))
    S1, S2 = scattering_amplitudes(sol, theta)
    if plane == E_PLANE:
        S = S2
    elif plane == H_PLANE:
        S = S1
    else:
        raise ValueError("plane must be 'E' or 'H'")
    rcs = 4.0 * np.pi * np.abs(S) ** 2 / kappa**2
    return rcs, 10.0 * np.log10(rcs)
