# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: connection solve and environment RK4 step.

Must stay behaviorally identical to ``pure.py`` (same chain convention,
same saturation handling); the parity tests compare the two backends.
"""

from libc.math cimport cos, sin, fabs, NAN

import numpy as np

BACKEND = "compiled"

cdef double DET_FLOOR = 1e-30


cdef void _accumulate(double* ad, double* s, double w1, double w2, double w3,
                      double* m, double* b) noexcept nogil:
    # m += ad^T diag(w) ad ; b += ad^T diag(w) s   (ad 3x3, s 3x2, row major)
    cdef double wad[9]
    cdef double ws[6]
    cdef int i, j, k
    for j in range(3):
        wad[0 * 3 + j] = w1 * ad[0 * 3 + j]
        wad[1 * 3 + j] = w2 * ad[1 * 3 + j]
        wad[2 * 3 + j] = w3 * ad[2 * 3 + j]
    for j in range(2):
        ws[0 * 2 + j] = w1 * s[0 * 2 + j]
        ws[1 * 2 + j] = w2 * s[1 * 2 + j]
        ws[2 * 2 + j] = w3 * s[2 * 2 + j]
    for i in range(3):
        for j in range(3):
            for k in range(3):
                m[i * 3 + j] += ad[k * 3 + i] * wad[k * 3 + j]
        for j in range(2):
            for k in range(3):
                b[i * 2 + j] += ad[k * 3 + i] * ws[k * 2 + j]


cdef double _connection(double a1, double a2, double h,
                        double w1, double w2, double w3,
                        double* out) noexcept nogil:
    """Fill out[6] with A(alpha) row major; return det of the 3x3 block."""
    cdef double c1 = cos(a1), s1 = sin(a1)
    cdef double c2 = cos(a2), s2 = sin(a2)
    cdef double c12 = cos(a1 + a2), s12 = sin(a1 + a2)
    cdef double p2x = h * (1.0 + c1), p2y = h * s1
    cdef double p3x = h * (1.0 + 2.0 * c1 + c12), p3y = h * (2.0 * s1 + s12)

    cdef double m[9]
    cdef double b[6]
    cdef double ad[9]
    cdef double sc[6]
    cdef int i

    # link 1: identity adjoint, zero joint columns
    m[0] = w1; m[1] = 0.0; m[2] = 0.0
    m[3] = 0.0; m[4] = w2; m[5] = 0.0
    m[6] = 0.0; m[7] = 0.0; m[8] = w3
    for i in range(6):
        b[i] = 0.0

    # link 2
    ad[0] = c1;  ad[1] = s1;  ad[2] = s1 * p2x - c1 * p2y
    ad[3] = -s1; ad[4] = c1;  ad[5] = c1 * p2x + s1 * p2y
    ad[6] = 0.0; ad[7] = 0.0; ad[8] = 1.0
    sc[0] = 0.0; sc[1] = 0.0
    sc[2] = h;   sc[3] = 0.0
    sc[4] = 1.0; sc[5] = 0.0
    _accumulate(ad, sc, w1, w2, w3, m, b)

    # link 3
    ad[0] = c12;  ad[1] = s12;  ad[2] = s12 * p3x - c12 * p3y
    ad[3] = -s12; ad[4] = c12;  ad[5] = c12 * p3x + s12 * p3y
    ad[6] = 0.0;  ad[7] = 0.0;  ad[8] = 1.0
    sc[0] = 2.0 * h * s2;           sc[1] = 0.0
    sc[2] = h * (1.0 + 2.0 * c2);   sc[3] = h
    sc[4] = 1.0;                    sc[5] = 1.0
    _accumulate(ad, sc, w1, w2, w3, m, b)

    # adjugate solve of m x = b
    cdef double adj[9]
    adj[0] = m[4] * m[8] - m[5] * m[7]
    adj[1] = m[2] * m[7] - m[1] * m[8]
    adj[2] = m[1] * m[5] - m[2] * m[4]
    adj[3] = m[5] * m[6] - m[3] * m[8]
    adj[4] = m[0] * m[8] - m[2] * m[6]
    adj[5] = m[2] * m[3] - m[0] * m[5]
    adj[6] = m[3] * m[7] - m[4] * m[6]
    adj[7] = m[1] * m[6] - m[0] * m[7]
    adj[8] = m[0] * m[4] - m[1] * m[3]
    cdef double det = m[0] * adj[0] + m[1] * adj[3] + m[2] * adj[6]

    cdef int j, k
    if fabs(det) <= DET_FLOOR:
        for i in range(6):
            out[i] = NAN
        return det
    for i in range(3):
        for j in range(2):
            out[i * 2 + j] = 0.0
            for k in range(3):
                out[i * 2 + j] += adj[i * 3 + k] * b[k * 2 + j]
            out[i * 2 + j] /= det
    return det


def connection_batch(a1, a2, double h, double w1, double w2, double w3):
    """Local connection A(alpha) at N shapes; returns (A, det)."""
    a1 = np.ascontiguousarray(a1, dtype=np.float64)
    a2 = np.ascontiguousarray(a2, dtype=np.float64)
    if a1.shape != a2.shape or a1.ndim != 1:
        raise ValueError("a1 and a2 must be equal-length 1-d arrays")
    cdef Py_ssize_t n = a1.shape[0]
    out = np.empty((n, 3, 2))
    det = np.empty(n)
    cdef double[::1] v1 = a1
    cdef double[::1] v2 = a2
    cdef double[:, :, ::1] ov = out
    cdef double[::1] dv = det
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            dv[i] = _connection(v1[i], v2[i], h, w1, w2, w3, &ov[i, 0, 0])
    return out, det


cdef void _stage(double th, double* xi, double* k) noexcept nogil:
    cdef double c = cos(th), s = sin(th)
    k[0] = c * xi[0] - s * xi[1]
    k[1] = s * xi[0] + c * xi[1]
    k[2] = xi[2]


cdef void _pose_rk4(double* state, double* xi0, double* xim, double* xi1,
                    double dt) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    _stage(state[2], xi0, k1)
    _stage(state[2] + 0.5 * dt * k1[2], xim, k2)
    _stage(state[2] + 0.5 * dt * k2[2], xim, k3)
    _stage(state[2] + dt * k3[2], xi1, k4)
    cdef int i
    for i in range(3):
        state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def env_step(double x, double y, double th, double a1, double a2,
             double u1, double u2, double dt, double limit,
             double h, double w1, double w2, double w3):
    """One environment step; see the pure backend for the contract."""
    cdef double a[2]
    cdef double u[2]
    a[0] = min(max(a1, -limit), limit)
    a[1] = min(max(a2, -limit), limit)
    u[0] = u1
    u[1] = u2
    cdef int i
    for i in range(2):
        if (a[i] >= limit and u[i] > 0.0) or (a[i] <= -limit and u[i] < 0.0):
            u[i] = 0.0
    if u[0] == 0.0 and u[1] == 0.0:
        return x, y, th, a[0], a[1]

    cdef double state[3]
    state[0] = x; state[1] = y; state[2] = th
    cdef double t = 0.0
    cdef double rem, sub, target, half
    cdef bint hit[2]
    cdef double amat[6]
    cdef double xi0[3]
    cdef double xim[3]
    cdef double xi1[3]
    cdef double sa1, sa2
    cdef int it, j

    for it in range(4):
        rem = dt - t
        if rem <= 1e-15:
            break
        sub = rem
        for i in range(2):
            if u[i] != 0.0:
                target = limit if u[i] > 0.0 else -limit
                if (target - a[i]) / u[i] < sub:
                    sub = (target - a[i]) / u[i]
        for i in range(2):
            hit[i] = False
            if u[i] != 0.0:
                target = limit if u[i] > 0.0 else -limit
                if (target - a[i]) / u[i] <= sub + 1e-15:
                    hit[i] = True

        half = 0.5 * sub
        _connection(a[0], a[1], h, w1, w2, w3, amat)
        for j in range(3):
            xi0[j] = -(amat[j * 2] * u[0] + amat[j * 2 + 1] * u[1])
        sa1 = a[0] + u[0] * half
        sa2 = a[1] + u[1] * half
        _connection(sa1, sa2, h, w1, w2, w3, amat)
        for j in range(3):
            xim[j] = -(amat[j * 2] * u[0] + amat[j * 2 + 1] * u[1])
        sa1 = a[0] + u[0] * sub
        sa2 = a[1] + u[1] * sub
        _connection(sa1, sa2, h, w1, w2, w3, amat)
        for j in range(3):
            xi1[j] = -(amat[j * 2] * u[0] + amat[j * 2 + 1] * u[1])
        _pose_rk4(state, xi0, xim, xi1, sub)
        a[0] += u[0] * sub
        a[1] += u[1] * sub
        t += sub

        if sub >= rem:
            for i in range(2):
                if hit[i]:
                    a[i] = limit if u[i] > 0.0 else -limit
            break
        for i in range(2):
            if hit[i]:
                a[i] = limit if u[i] > 0.0 else -limit
                u[i] = 0.0
        if u[0] == 0.0 and u[1] == 0.0:
            break
    return state[0], state[1], state[2], a[0], a[1]
