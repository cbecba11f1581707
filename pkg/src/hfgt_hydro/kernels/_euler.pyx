# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused explicit-Euler loop over flat arrays.

Floating-point operations follow the same order as the pure-Python loop
(head, resistance law, clamp, mixing, triplet accumulation), so both
backends agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

ctypedef cnp.int64_t idx_t

OK = 0
NON_FINITE = 2
UNDERFLOW = 3


def euler_loop(double[::1] q,
               const idx_t[::1] m_rows, const idx_t[::1] m_cols, const double[::1] m_vals,
               idx_t w0, idx_t n_w, idx_t n0, idx_t n_n,
               const double[::1] inv_area, const double[::1] vmin, const double[::1] elev,
               const idx_t[::1] e_col, const idx_t[::1] e_o, const idx_t[::1] e_d, const double[::1] e_r,
               const idx_t[::1] p_col, const idx_t[::1] p_edge,
               const idx_t[::1] p_ow, const idx_t[::1] p_dw, const idx_t[::1] p_on, const idx_t[::1] p_dn,
               const idx_t[::1] a_col, const double[:, ::1] exo,
               double dt, idx_t K, idx_t stride, double rho_g, double eps_v, double underflow, double keep,
               double[:, ::1] states, double[:, ::1] firings, list clamps):
    """Advance ``q`` in place for ``K`` steps; returns ``(status, step, index)``."""
    cdef idx_t n = q.shape[0]
    cdef idx_t n_caps = firings.shape[1]
    cdef idx_t n_e = e_col.shape[0]
    cdef idx_t n_p = p_col.shape[0]
    cdef idx_t n_a = a_col.shape[0]
    cdef idx_t nnz = m_vals.shape[0]
    cdef double[::1] head = np.zeros(n_w)
    cdef double[::1] rates = np.zeros(n_e)
    cdef double[::1] withdrawal = np.zeros(n_w)
    cdef double[::1] factor = np.ones(n_w)
    cdef double[::1] U = np.zeros(n_caps)
    cdef double[::1] delta = np.zeros(n)
    cdef idx_t k, i, j, p, src, row
    cdef double r, avail, v, m, x
    cdef bint clamped

    for k in range(K + 1):
        for j in range(n_caps):
            U[j] = 0.0
        for j in range(n_a):
            U[a_col[j]] = exo[k, j]

        for p in range(n_w):
            head[p] = inv_area[p] * (q[w0 + p] - vmin[p]) + elev[p]
        for i in range(n_e):
            rates[i] = rho_g * (head[e_o[i]] - head[e_d[i]]) / e_r[i]

        for p in range(n_w):
            withdrawal[p] = 0.0
            factor[p] = 1.0
        for i in range(n_e):
            r = rates[i]
            if r > 0:
                withdrawal[e_o[i]] += r
            elif r < 0:
                withdrawal[e_d[i]] -= r
        clamped = False
        for p in range(n_w):
            if withdrawal[p] <= 0:
                continue
            avail = q[w0 + p] - vmin[p]
            x = withdrawal[p] * dt
            if x > avail:
                factor[p] = (avail if avail > 0.0 else 0.0) * keep / x if x > 0.0 else 0.0
                clamped = True
                if k < K:
                    clamps.append((k, p, factor[p]))
        if clamped:
            for i in range(n_e):
                src = e_o[i] if rates[i] > 0 else e_d[i]
                if rates[i] != 0 and factor[src] != 1.0:
                    rates[i] *= factor[src]
        for i in range(n_e):
            U[e_col[i]] = rates[i]

        for i in range(n_p):
            r = rates[p_edge[i]]
            if r >= 0:
                v = q[w0 + p_ow[i]]
                m = q[n0 + p_on[i]]
            else:
                v = q[w0 + p_dw[i]]
                m = q[n0 + p_dn[i]]
            U[p_col[i]] = m * r / v if v > eps_v else 0.0

        if k % stride == 0:
            for j in range(n):
                states[k // stride, j] = q[j]
            for j in range(n_caps):
                firings[k // stride, j] = U[j]
        if k == K:
            break

        for j in range(n):
            delta[j] = 0.0
        for i in range(nnz):
            delta[m_rows[i]] += m_vals[i] * U[m_cols[i]]
        for j in range(n):
            q[j] = q[j] + delta[j] * dt
        for j in range(n):
            if not isfinite(q[j]):
                return NON_FINITE, k, j
        row = -1
        x = 0.0
        for j in range(n0, n0 + n_n):
            if q[j] < x:
                x = q[j]
                row = j
        if row >= 0:
            if x < underflow:
                return UNDERFLOW, k, row
            for j in range(n0, n0 + n_n):
                if q[j] < 0:
                    q[j] = 0.0
    return OK, K, -1
