"""Kernel backend selection.

The compiled extension is used when it imports; set
``HARTREE_MWO_PURE_PYTHON=1`` to force the NumPy fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HARTREE_MWO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def phase_kick(u, pot, h):
    """Multiply ``u`` in place by ``exp(-i h pot)``."""
    if BACKEND == "cython" and u.flags.c_contiguous and pot.flags.c_contiguous:
        _impl.phase_kick(u.reshape(-1), np.ascontiguousarray(pot, dtype=float).reshape(-1), float(h))
    else:
        _pykernels.phase_kick(u, pot, h)


def potential_vt1(r, t, c0, T1, coulomb=True):
    """``(V, dV/dr, d2V/dr2)`` of the cutoff Coulomb potential at radii ``r``."""
    r = np.ascontiguousarray(r, dtype=float)
    shape = r.shape
    out = _impl.potential_vt1(r.reshape(-1), float(t), float(c0), float(T1), int(bool(coulomb)))
    return np.asarray(out).reshape((3,) + shape)


def integrate_characteristics(state, t0, t1, nsteps, c0, T1, coulomb=True):
    """Advance rows ``(r, p, S, Jr, Jp)`` of ``state`` from t0 to t1 with RK4, in place."""
    if BACKEND == "cython":
        _impl.integrate_characteristics(state, float(t0), float(t1), int(nsteps), float(c0),
                                        float(T1), int(bool(coulomb)))
    else:
        _pykernels.integrate_characteristics(state, t0, t1, nsteps, c0, T1, coulomb)
