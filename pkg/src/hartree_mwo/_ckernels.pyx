# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: the Strang potential kick and the RK4 integrator
for radial Hamilton-Jacobi characteristics. Semantics match _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, cos, sin, log, ceil

cnp.import_array()


def phase_kick(double complex[::1] u, const double[::1] pot, double h):
    """u[i] *= exp(-i h pot[i]) in place."""
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double a, c, s, re, im
    with nogil:
        for i in range(n):
            a = h * pot[i]
            c = cos(a)
            s = sin(a)
            re = u[i].real
            im = u[i].imag
            u[i] = (re * c + im * s) + 1j * (im * c - re * s)


cdef inline void _bump(double s, double* f, double* f1, double* f2) noexcept nogil:
    # f = exp(-1/s) and its first two derivatives, zero for s <= 0
    cdef double e
    if s <= 0.0:
        f[0] = 0.0
        f1[0] = 0.0
        f2[0] = 0.0
        return
    e = exp(-1.0 / s)
    f[0] = e
    f1[0] = e / (s * s)
    f2[0] = e * (1.0 - 2.0 * s) / (s * s * s * s)


cdef inline void _step_fn(double s, double* S, double* S1, double* S2) noexcept nogil:
    # smooth step: 1 for s <= 0, 0 for s >= 1
    cdef double a, a1, a2, b, b1, b2, fa, fa1, fa2, D, N, Np, D1
    if s <= 0.0:
        S[0] = 1.0
        S1[0] = 0.0
        S2[0] = 0.0
        return
    if s >= 1.0:
        S[0] = 0.0
        S1[0] = 0.0
        S2[0] = 0.0
        return
    _bump(1.0 - s, &fa, &fa1, &fa2)
    a = fa
    a1 = -fa1
    a2 = fa2
    _bump(s, &b, &b1, &b2)
    D = a + b
    N = a1 * b - a * b1
    Np = a2 * b - a * b2
    D1 = a1 + b1
    S[0] = a / D
    S1[0] = N / (D * D)
    S2[0] = Np / (D * D) - 2.0 * N * D1 / (D * D * D)


cdef inline void _potential(double t, double r, double c0, double T1, int coulomb,
                            double* V, double* Vr, double* Vrr) noexcept nogil:
    cdef double lam, q, s, S, S1, S2, phi, phi1, phi2
    if coulomb == 0 or r <= 0.0:
        V[0] = 0.0
        Vr[0] = 0.0
        Vrr[0] = 0.0
        return
    lam = 2.0 / (t + T1)
    q = 0.25 * c0
    s = (lam * r - q) / q
    _step_fn(s, &S, &S1, &S2)
    phi = 1.0 - S
    phi1 = -lam * S1 / q
    phi2 = -lam * lam * S2 / (q * q)
    V[0] = phi / r
    Vr[0] = phi1 / r - phi / (r * r)
    Vrr[0] = phi2 / r - 2.0 * phi1 / (r * r) + 2.0 * phi / (r * r * r)


def potential_vt1(double[::1] r, double t, double c0, double T1, int coulomb):
    cdef Py_ssize_t i, n = r.shape[0]
    out = np.empty((3, n))
    cdef double[:, ::1] o = out
    cdef double V, Vr, Vrr
    with nogil:
        for i in range(n):
            _potential(t, r[i], c0, T1, coulomb, &V, &Vr, &Vrr)
            o[0, i] = V
            o[1, i] = Vr
            o[2, i] = Vrr
    return out


cdef inline void _rhs(double t, double* y, double* dy, double c0, double T1,
                      int coulomb) noexcept nogil:
    cdef double V, Vr, Vrr
    _potential(t, y[0], c0, T1, coulomb, &V, &Vr, &Vrr)
    dy[0] = y[1]
    dy[1] = -Vr
    dy[2] = 0.5 * y[1] * y[1] - V
    dy[3] = y[4]
    dy[4] = -Vrr * y[3]


def integrate_characteristics(double[:, ::1] state, double t0, double t1, Py_ssize_t nsteps,
                              double c0, double T1, int coulomb):
    """RK4 from t0 to t1 (either direction) for rows (r, p, S, Jr, Jp)."""
    cdef Py_ssize_t i, k, j, n = state.shape[1]
    cdef double h = (t1 - t0) / nsteps
    cdef double t
    cdef double y[5]
    cdef double yt[5]
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    with nogil:
        for i in range(n):
            for j in range(5):
                y[j] = state[j, i]
            for k in range(nsteps):
                t = t0 + k * h
                _rhs(t, y, k1, c0, T1, coulomb)
                for j in range(5):
                    yt[j] = y[j] + 0.5 * h * k1[j]
                _rhs(t + 0.5 * h, yt, k2, c0, T1, coulomb)
                for j in range(5):
                    yt[j] = y[j] + 0.5 * h * k2[j]
                _rhs(t + 0.5 * h, yt, k3, c0, T1, coulomb)
                for j in range(5):
                    yt[j] = y[j] + h * k3[j]
                _rhs(t + h, yt, k4, c0, T1, coulomb)
                for j in range(5):
                    y[j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            for j in range(5):
                state[j, i] = y[j]
