"""NumPy fallbacks for the compiled kernels in ``_ckernels.pyx``.

Same signatures and in-place semantics; vectorized over trajectories
instead of looping per trajectory.
"""

import numpy as np


def phase_kick(u, pot, h):
    u *= np.exp(-1j * h * pot)


def _bump(s):
    pos = s > 0
    sp = np.where(pos, s, 1.0)
    e = np.where(pos, np.exp(-1.0 / sp), 0.0)
    f1 = np.where(pos, e / sp**2, 0.0)
    f2 = np.where(pos, e * (1.0 - 2.0 * sp) / sp**4, 0.0)
    return e, f1, f2


def _step_fn(s):
    inside = (s > 0) & (s < 1)
    si = np.where(inside, s, 0.5)
    fa, fa1, fa2 = _bump(1.0 - si)
    a, a1, a2 = fa, -fa1, fa2
    b, b1, b2 = _bump(si)
    D = a + b
    N = a1 * b - a * b1
    Np = a2 * b - a * b2
    D1 = a1 + b1
    S = np.where(inside, a / D, np.where(s <= 0, 1.0, 0.0))
    S1 = np.where(inside, N / D**2, 0.0)
    S2 = np.where(inside, Np / D**2 - 2.0 * N * D1 / D**3, 0.0)
    return S, S1, S2


def potential_vt1(r, t, c0, T1, coulomb):
    r = np.asarray(r, dtype=float)
    if not coulomb:
        z = np.zeros_like(r)
        return np.stack([z, z, z])
    lam = 2.0 / (t + T1)
    q = 0.25 * c0
    S, S1, S2 = _step_fn((lam * r - q) / q)
    phi = 1.0 - S
    phi1 = -lam * S1 / q
    phi2 = -lam * lam * S2 / (q * q)
    pos = r > 0
    rr = np.where(pos, r, 1.0)
    V = np.where(pos, phi / rr, 0.0)
    Vr = np.where(pos, phi1 / rr - phi / rr**2, 0.0)
    Vrr = np.where(pos, phi2 / rr - 2.0 * phi1 / rr**2 + 2.0 * phi / rr**3, 0.0)
    return np.stack([V, Vr, Vrr])


def _rhs(t, y, c0, T1, coulomb):
    V, Vr, Vrr = potential_vt1(y[0], t, c0, T1, coulomb)
    return np.stack([y[1], -Vr, 0.5 * y[1] ** 2 - V, y[4], -Vrr * y[3]])


def integrate_characteristics(state, t0, t1, nsteps, c0, T1, coulomb):
    h = (t1 - t0) / nsteps
    y = np.array(state)
    for k in range(nsteps):
        t = t0 + k * h
        k1 = _rhs(t, y, c0, T1, coulomb)
        k2 = _rhs(t + 0.5 * h, y + 0.5 * h * k1, c0, T1, coulomb)
        k3 = _rhs(t + 0.5 * h, y + 0.5 * h * k2, c0, T1, coulomb)
        k4 = _rhs(t + h, y + h * k3, c0, T1, coulomb)
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    state[...] = y
