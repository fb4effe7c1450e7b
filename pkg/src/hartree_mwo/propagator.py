"""Strang-split time stepping for ``i u_t = -Delta u/2 + u/|x| + ((1/|x|) * |u|^2) u``.

One step of size ``h`` (negative for backward runs):

    u <- exp(-i h |xi|^2/4) u            (kinetic half step, spectral)
    u <- exp(-i h (V_c + V_H[u])) u      (potential kick, exact for the kick ODE)
    u <- exp(-i h |xi|^2/4) u

``V_c = 1/sqrt(|x|^2 + eps^2)`` and ``V_H[u] = (1/|x|) * |u|^2``,
refreshed from the current ``u``. Each factor is unitary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, ContractViolation, DomainError, MassDriftError
from .grid import POSITION, ComplexField, leakage_fraction


@dataclass
class EvolutionConfig:
    """Step size, softening and output schedule.

    ``coulomb_softening=None`` means half the grid spacing; ``math.inf``
    switches the external potential off (synthetic free runs).
    """

    dt: float
    coulomb_softening: float | None = None
    scheme: str = "strang"
    record_times: tuple = ()
    coupling: float = 1.0
    mass_tol: float = 1e-8
    leakage_tol: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.scheme != "strang":
            raise ConfigError(f"unsupported scheme {self.scheme!r}")
        if self.coupling < 0:
            raise ConfigError("attractive coupling K < 0 is not supported")
        if self.coupling not in (0.0, 1.0):
            raise ConfigError("the Coulomb coupling is fixed to K = 1 (or 0 to switch it off)")
        if self.coulomb_softening is not None and self.coulomb_softening < 0:
            raise ConfigError("coulomb_softening must be nonnegative")
        self.record_times = tuple(float(t) for t in self.record_times)

    def softening(self, grid):
        return 0.5 * grid.spacing if self.coulomb_softening is None else self.coulomb_softening

    def external_potential(self, grid):
        eps = self.softening(grid)
        if self.coupling == 0 or eps == math.inf:
            return None
        r = grid.radius
        return np.broadcast_to(self.coupling / np.sqrt(r * r + eps * eps), grid.shape)


@dataclass
class Trajectory:
    """Recorded samples of one run, in integration order."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    mass_series: list = field(default_factory=list)
    leakage_series: list = field(default_factory=list)
    leakage_flag: bool = False
    steps: int = 0

    def state_at(self, t):
        for tk, s in zip(self.times, self.states):
            if math.isclose(tk, t, rel_tol=1e-12, abs_tol=1e-14):
                return s
        raise DomainError(f"t={t} was not recorded")

    @property
    def final(self):
        return self.states[-1]

    def mass_drift(self):
        m = np.asarray(self.mass_series)
        return float(np.max(np.abs(m / m[0] - 1.0))) if m.size and m[0] > 0 else 0.0


class _Stepper:
    def __init__(self, grid, cfg, nonlinear):
        self.grid = grid
        self.cfg = cfg
        self.nonlinear = nonlinear
        self.V_ext = cfg.external_potential(grid)
        self._half = {}

    def half_symbol(self, h):
        if h not in self._half:
            self._half[h] = np.exp(-0.25j * h * self.grid.k2)
        return self._half[h]

    def step(self, u, h):
        g = self.grid
        sym = self.half_symbol(h)
        u = g.multiply(u, sym)
        pot = None
        if self.V_ext is not None:
            pot = np.array(self.V_ext, dtype=float)
        if self.nonlinear:
            vh = g.coulomb(np.abs(u) ** 2)
            pot = vh if pot is None else pot + vh
        if pot is not None:
            u = np.ascontiguousarray(u)
            kernels.phase_kick(u, np.ascontiguousarray(pot), h)
        return g.multiply(u, sym)


def _mass(grid, u):
    return math.sqrt(grid.integrate(np.abs(u) ** 2))


def _evolve(u0, t0, t1, cfg, nonlinear, keep_states=True, on_record=None):
    if u0.space != POSITION:
        raise ContractViolation("propagation acts on position-space fields")
    grid = u0.grid
    lo, hi = min(t0, t1), max(t0, t1)
    rec = sorted({t for t in cfg.record_times if lo - 1e-12 <= t <= hi + 1e-12},
                 reverse=bool(t1 < t0))
    if any(not (lo - 1e-12 <= t <= hi + 1e-12) for t in cfg.record_times):
        raise ContractViolation("record_times lie outside the integration window")
    stops = [t for t in rec if not math.isclose(t, t0, rel_tol=0, abs_tol=1e-12)]
    if not stops or not math.isclose(stops[-1], t1, rel_tol=0, abs_tol=1e-12):
        stops.append(t1)
    stepper = _Stepper(grid, cfg, nonlinear)
    traj = Trajectory()
    u = np.array(u0.values, dtype=complex)
    m0 = _mass(grid, u)
    rec_set = rec

    def record(t):
        m = _mass(grid, u)
        leak = leakage_fraction(grid, u)
        traj.times.append(t)
        traj.mass_series.append(m)
        traj.leakage_series.append(leak)
        if leak > cfg.leakage_tol:
            traj.leakage_flag = True
        f = ComplexField(grid, u.copy())
        if keep_states:
            traj.states.append(f)
        if on_record is not None:
            on_record(t, f)
        if m0 > 0 and abs(m / m0 - 1.0) > cfg.mass_tol:
            raise MassDriftError(f"relative mass drift {abs(m / m0 - 1):.3g} at t={t:g}")

    if any(math.isclose(t, t0, rel_tol=0, abs_tol=1e-12) for t in rec_set):
        record(float(t0))
    t = float(t0)
    for stop in stops:
        span = stop - t
        n = max(1, int(math.ceil(abs(span) / cfg.dt - 1e-9)))
        h = span / n
        for _ in range(n):
            u = stepper.step(u, h)
        traj.steps += n
        t = stop
        if any(math.isclose(stop, r, rel_tol=0, abs_tol=1e-12) for r in rec_set):
            record(stop)
    if not keep_states or not traj.states or traj.times[-1] != t:
        final = ComplexField(grid, u)
        if not traj.times or not math.isclose(traj.times[-1], t, rel_tol=0, abs_tol=1e-12):
            m = _mass(grid, u)
            if m0 > 0 and abs(m / m0 - 1.0) > cfg.mass_tol:
                raise MassDriftError(f"relative mass drift {abs(m / m0 - 1):.3g} at t={t:g}")
        traj.final_state = final
    else:
        traj.final_state = traj.states[-1]
    return traj


def linear_propagate(u0, t0, t1, cfg):
    """``exp(-i (t1 - t0) H) u0`` by Strang splitting."""
    return _evolve(u0, t0, t1, _no_records(cfg), nonlinear=False, keep_states=False).final_state


def linear_trajectory(u0, t0, t1, cfg, keep_states=True, on_record=None):
    return _evolve(u0, t0, t1, cfg, nonlinear=False, keep_states=keep_states, on_record=on_record)


def nonlinear_propagate(u0, t0, t1, cfg, keep_states=True, on_record=None):
    """Full Hartree flow; states recorded at ``cfg.record_times``."""
    return _evolve(u0, t0, t1, cfg, nonlinear=True, keep_states=keep_states, on_record=on_record)


def backward_propagate(uT, T_end, t_target, cfg, keep_states=True, on_record=None,
                       nonlinear=True):
    """Integrate from ``T_end`` down to ``t_target >= 1``."""
    if t_target < 1:
        raise DomainError("backward runs stop at t >= 1")
    if t_target > T_end:
        raise DomainError("t_target must not exceed T_end")
    return _evolve(uT, T_end, t_target, cfg, nonlinear=nonlinear, keep_states=keep_states,
                   on_record=on_record)


def _no_records(cfg):
    from dataclasses import replace

    return replace(cfg, record_times=())
