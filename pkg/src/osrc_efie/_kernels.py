"""Numba kernels for dense Galerkin assembly.

Both operators are tested with SNC functions in the L2 pairing. With local
RWG functions c_a (x - P_a) on the test triangle and c_b (y - Q_b) on the
trial triangle, and G(r) = exp(ikr) / (4 pi r):

    EFIE[a, b] = -ik c_a c_b int int G (x - P_a).(y - Q_b)
                 - 4 c_a c_b / (ik) int int G
    MFIE[a, b] = -c_a c_b int int g(r) (P_a - Q_b).((y - Q_b) x (x - P_a)),
                 g(r) = exp(ikr) (ikr - 1) / (4 pi r^3)

so each pair only needs a handful of kernel moments (see ``_moments``).
"""

import numba as nb
import numpy as np

EFIE = 0
MFIE = 1

_INV4PI = 1.0 / (4.0 * np.pi)


@nb.njit(cache=True, fastmath=False)
def _moments(kind, k, xs, ys, ws, m):
    # m[0] = sum w K, m[1:4] = sum w K x, m[4:7] = sum w K y,
    # m[7] = sum w K x.y (EFIE) ; m[7:10] = sum w K (y cross x) (MFIE)
    s0 = s1 = s2 = s3 = s4 = s5 = s6 = s7 = s8 = s9 = 0.0j
    for q in range(ws.shape[0]):
        x0, x1, x2 = xs[q, 0], xs[q, 1], xs[q, 2]
        y0, y1, y2 = ys[q, 0], ys[q, 1], ys[q, 2]
        d0, d1, d2 = x0 - y0, x1 - y1, x2 - y2
        r = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        kr = k * r
        c = np.cos(kr)
        s = np.sin(kr)
        if kind == EFIE:
            f = ws[q] * _INV4PI / r
            kv = complex(f * c, f * s)
        else:
            # exp(ikr) (ikr - 1) = -(c + kr s) + i (kr c - s)
            f = ws[q] * _INV4PI / (r * r * r)
            kv = complex(-f * (c + kr * s), f * (kr * c - s))
        s0 += kv
        s1 += kv * x0
        s2 += kv * x1
        s3 += kv * x2
        s4 += kv * y0
        s5 += kv * y1
        s6 += kv * y2
        if kind == EFIE:
            s7 += kv * (x0 * y0 + x1 * y1 + x2 * y2)
        else:
            s7 += kv * (y1 * x2 - y2 * x1)
            s8 += kv * (y2 * x0 - y0 * x2)
            s9 += kv * (y0 * x1 - y1 * x0)
    m[0] = s0
    m[1] = s1
    m[2] = s2
    m[3] = s3
    m[4] = s4
    m[5] = s5
    m[6] = s6
    m[7] = s7
    if m.shape[0] > 8:
        m[8] = s8
        m[9] = s9


@nb.njit(cache=True)
def _block(kind, k, m, P, Q, ct, cs, out):
    """3x3 local block from moments; P, Q are the corner arrays (3, 3)."""
    ik = 1j * k
    for a in range(3):
        for b in range(3):
            cab = ct[a] * cs[b]
            if cab == 0.0:
                out[a, b] = 0.0
                continue
            if kind == EFIE:
                pq = P[a, 0] * Q[b, 0] + P[a, 1] * Q[b, 1] + P[a, 2] * Q[b, 2]
                dot = (
                    m[7]
                    - (m[1] * Q[b, 0] + m[2] * Q[b, 1] + m[3] * Q[b, 2])
                    - (P[a, 0] * m[4] + P[a, 1] * m[5] + P[a, 2] * m[6])
                    + pq * m[0]
                )
                out[a, b] = -ik * cab * dot - 4.0 * cab * m[0] / ik
            else:
                # V = Jyx - Jy x P_a - Q_b x Jx + (Q_b x P_a) J0
                px, py, pz = P[a, 0], P[a, 1], P[a, 2]
                qx, qy, qz = Q[b, 0], Q[b, 1], Q[b, 2]
                v0 = m[7] - (m[5] * pz - m[6] * py) - (qy * m[3] - qz * m[2]) + (qy * pz - qz * py) * m[0]
                v1 = m[8] - (m[6] * px - m[4] * pz) - (qz * m[1] - qx * m[3]) + (qz * px - qx * pz) * m[0]
                v2 = m[9] - (m[4] * py - m[5] * px) - (qx * m[2] - qy * m[1]) + (qx * py - qy * px) * m[0]
                out[a, b] = -cab * ((px - qx) * v0 + (py - qy) * v1 + (pz - qz) * v2)


@nb.njit(cache=True)
def _tensor_points(xt, wt, xs_, ws_, X, Y, W):
    n = 0
    for i in range(wt.shape[0]):
        for j in range(ws_.shape[0]):
            X[n, 0] = xt[i, 0]
            X[n, 1] = xt[i, 1]
            X[n, 2] = xt[i, 2]
            Y[n, 0] = xs_[j, 0]
            Y[n, 1] = xs_[j, 1]
            Y[n, 2] = xs_[j, 2]
            W[n] = wt[i] * ws_[j]
            n += 1


@nb.njit(cache=True)
def _touch(tri, t, s):
    for a in range(3):
        for b in range(3):
            if tri[t, a] == tri[s, b]:
                return True
    return False


@nb.njit(parallel=True, cache=True)
def assemble_regular(
    kind, k, corners, coef, dofs, tri, centroid, diam,
    color_ptr, color_idx, xf, wf, xn, wn, near_factor, out,
):
    """Add all non-touching triangle pairs into ``out`` (rows: test dofs).

    Triangles are processed colour by colour; triangles of one colour share
    no edge, so their rows are disjoint and the prange is race free. The
    accumulation order of every entry is independent of the thread count.
    """
    T = corners.shape[0]
    nf = wf.shape[1]
    nn = wn.shape[1]
    for c in range(color_ptr.shape[0] - 1):
        for ii in nb.prange(color_ptr[c], color_ptr[c + 1]):
            t = color_idx[ii]
            Xf = np.empty((nf * nf, 3))
            Yf = np.empty((nf * nf, 3))
            Wf = np.empty(nf * nf)
            Xn = np.empty((nn * nn, 3))
            Yn = np.empty((nn * nn, 3))
            Wn = np.empty(nn * nn)
            m = np.empty(10, dtype=np.complex128)
            blk = np.empty((3, 3), dtype=np.complex128)
            for s in range(T):
                if _touch(tri, t, s):
                    continue
                d0 = centroid[t, 0] - centroid[s, 0]
                d1 = centroid[t, 1] - centroid[s, 1]
                d2 = centroid[t, 2] - centroid[s, 2]
                dist = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                if dist < near_factor * max(diam[t], diam[s]):
                    _tensor_points(xn[t], wn[t], xn[s], wn[s], Xn, Yn, Wn)
                    _moments(kind, k, Xn, Yn, Wn, m)
                else:
                    _tensor_points(xf[t], wf[t], xf[s], wf[s], Xf, Yf, Wf)
                    _moments(kind, k, Xf, Yf, Wf, m)
                _block(kind, k, m, corners[t], corners[s], coef[t], coef[s], blk)
                for a in range(3):
                    ra = dofs[t, a]
                    if ra < 0:
                        continue
                    for b in range(3):
                        cb = dofs[s, b]
                        if cb >= 0:
                            out[ra, cb] += blk[a, b]


@nb.njit(cache=True)
def assemble_singular(
    kind, k, corners, coef, dofs, pairs, perms, rules_x, rules_y, rules_w, rule_ptr, out
):
    """Add touching pairs (t <= s) and their transposes into ``out``.

    ``pairs[p] = (t, s, rule)``; ``perms[p]`` gives the local vertex order
    used to map each triangle onto the Sauter-Schwab reference element.
    """
    m = np.empty(10, dtype=np.complex128)
    blk = np.empty((3, 3), dtype=np.complex128)
    for p in range(pairs.shape[0]):
        t, s, r = pairs[p, 0], pairs[p, 1], pairs[p, 2]
        lo, hi = rule_ptr[r], rule_ptr[r + 1]
        n = hi - lo
        X = np.empty((n, 3))
        Y = np.empty((n, 3))
        W = np.empty(n)
        A = corners[t]
        B = corners[s]
        pa0, pa1, pa2 = perms[p, 0], perms[p, 1], perms[p, 2]
        pb0, pb1, pb2 = perms[p, 3], perms[p, 4], perms[p, 5]
        jt = 0.0
        js = 0.0
        u0 = A[pa1] - A[pa0]
        u1 = A[pa2] - A[pa1]
        v0 = B[pb1] - B[pb0]
        v1 = B[pb2] - B[pb1]
        jt = np.sqrt((u0[1] * u1[2] - u0[2] * u1[1]) ** 2 + (u0[2] * u1[0] - u0[0] * u1[2]) ** 2 + (u0[0] * u1[1] - u0[1] * u1[0]) ** 2)
        js = np.sqrt((v0[1] * v1[2] - v0[2] * v1[1]) ** 2 + (v0[2] * v1[0] - v0[0] * v1[2]) ** 2 + (v0[0] * v1[1] - v0[1] * v1[0]) ** 2)
        for q in range(n):
            a1, a2 = rules_x[lo + q, 0], rules_x[lo + q, 1]
            b1, b2 = rules_y[lo + q, 0], rules_y[lo + q, 1]
            for d in range(3):
                X[q, d] = A[pa0, d] + a1 * u0[d] + a2 * u1[d]
                Y[q, d] = B[pb0, d] + b1 * v0[d] + b2 * v1[d]
            W[q] = rules_w[lo + q] * jt * js
        _moments(kind, k, X, Y, W, m)
        _block(kind, k, m, A, B, coef[t], coef[s], blk)
        for a in range(3):
            ra = dofs[t, a]
            if ra < 0:
                continue
            for b in range(3):
                cb = dofs[s, b]
                if cb < 0:
                    continue
                out[ra, cb] += blk[a, b]
                if s != t:
                    out[cb, ra] += blk[a, b]


@nb.njit(cache=True)
def pair_moments(kind, k, xs, ys, ws):
    m = np.empty(10, dtype=np.complex128)
    _moments(kind, k, xs, ys, ws, m)
    return m


@nb.njit(cache=True)
def pair_block(kind, k, m, P, Q, ct, cs):
    out = np.empty((3, 3), dtype=np.complex128)
    _block(kind, k, m, P, Q, ct, cs, out)
    return out
