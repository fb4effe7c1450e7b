"""Cutoff Coulomb potential and the Hamilton-Jacobi phase.

The phase solves

    -d_t psi = |grad psi|^2 / 2 + V_T1(t, x),
    V_T1(t, x) = (1 - chi(2x / (t + T1))) / |x|,

with the free terminal datum ``psi(T_end, x) = |x|^2 / (2 T_end)``. The
potential is radial, so every characteristic launched from the terminal
surface is a radial ray and the solve reduces to the ODE system

    r' = p,  p' = -V_r,  S' = p^2/2 - V,  Jr' = Jp,  Jp' = -V_rr Jr

integrated backward with RK4 (``S`` is the action, ``(Jr, Jp)`` the tangent
flow in the launch radius). ``psi(t, .)`` is then the Hermite interpolant
through ``(r, S, p)`` and ``psi_rr = Jp / Jr``. A non-positive ``Jr`` is a
characteristic crossing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.stats import qmc

from . import kernels
from ._pykernels import _step_fn
from .errors import CausticError, ContractViolation, DomainError, NumericalFailure
from .grid import RadialGrid, RealField

KNOT_RTOL = 1e-10


@dataclass(frozen=True)
class CutoffSpec:
    """Radial smooth cutoff: 1 on ``|x| <= c0/4``, 0 on ``|x| >= c0/2``."""

    c0: float

    @property
    def plateau_radius(self):
        return 0.25 * self.c0

    @property
    def support_radius(self):
        return 0.5 * self.c0

    def chi(self, r):
        q = self.plateau_radius
        return _step_fn((np.asarray(r, dtype=float) - q) / q)[0]


def build_chi(c0, grid=None):
    if not c0 > 0:
        raise DomainError("cutoff radius c0 must be positive")
    if grid is not None and c0 > grid.extent:
        raise DomainError(f"c0={c0} exceeds the box half-width {grid.extent}")
    return CutoffSpec(float(c0))


def potential_VT1(cut, T1, t, grid, coulomb=True):
    """``V_T1(t, x)`` sampled on ``grid``; 0 at the origin."""
    V = kernels.potential_vt1(grid.radius, t, cut.c0, T1, coulomb)[0]
    return RealField(grid, V)


def coverage_radius(grid):
    """Largest ``|x|`` a grid samples."""
    if isinstance(grid, RadialGrid):
        return grid.radius_max
    return math.sqrt(3.0) * grid.extent


@dataclass
class PhaseTable:
    """Radial samples of the phase at increasing time knots.

    Rows of ``r``, ``psi``, ``grad`` (radial derivative), ``psi_rr`` and
    ``jac`` belong to ``time_knots``; columns are characteristics ordered
    by launch radius.
    """

    time_knots: np.ndarray
    T1: float
    T_end: float
    cutoff: CutoffSpec
    coulomb: bool
    r: np.ndarray
    psi: np.ndarray
    grad: np.ndarray
    psi_rr: np.ndarray
    jac: np.ndarray
    _splines: dict = field(default_factory=dict, repr=False, compare=False)

    def index(self, t):
        k = np.nonzero(np.isclose(self.time_knots, t, rtol=KNOT_RTOL, atol=0))[0]
        if k.size == 0:
            raise DomainError(f"t={t} is not a knot of the phase table")
        return int(k[0])

    def covers(self, t):
        return bool(np.any(np.isclose(self.time_knots, t, rtol=KNOT_RTOL, atol=0)))

    def _spl(self, k):
        if k not in self._splines:
            r = self.r[k]
            self._splines[k] = (CubicHermiteSpline(r, self.psi[k], self.grad[k]),
                                CubicHermiteSpline(r, self.grad[k], self.psi_rr[k]))
        return self._splines[k]

    def _check_range(self, k, radii):
        if np.max(radii) > self.r[k, -1] * (1 + 1e-12):
            raise DomainError(f"radius {np.max(radii):.4g} beyond table coverage {self.r[k, -1]:.4g}")

    def psi_at(self, t, radii):
        k = self.index(t)
        radii = np.asarray(radii, dtype=float)
        self._check_range(k, radii)
        return self._spl(k)[0](radii)

    def grad_at(self, t, radii):
        k = self.index(t)
        radii = np.asarray(radii, dtype=float)
        self._check_range(k, radii)
        return self._spl(k)[1](radii)

    def psi_rr_at(self, t, radii):
        k = self.index(t)
        radii = np.asarray(radii, dtype=float)
        self._check_range(k, radii)
        return self._spl(k)[1].derivative()(radii)

    def laplacian_at(self, t, radii):
        radii = np.asarray(radii, dtype=float)
        prr = self.psi_rr_at(t, radii)
        p = self.grad_at(t, radii)
        small = radii < 1e-12
        rr = np.where(small, 1.0, radii)
        return np.where(small, 3.0 * prr, prr + 2.0 * p / rr)

    def psi_field(self, t, grid):
        return RealField(grid, self.psi_at(t, grid.radius))

    def grad_fields(self, t, grid):
        """The three Cartesian components of ``grad psi`` (cubic grids)."""
        if isinstance(grid, RadialGrid):
            return (RealField(grid, self.grad_at(t, grid.radius)),)
        r = grid.radius
        p = self.grad_at(t, r)
        fac = np.where(r > 0, p / np.where(r > 0, r, 1.0), 0.0)
        return tuple(RealField(grid, np.broadcast_to(c, grid.shape) * fac) for c in grid.coords)

    def scaled(self, factor):
        """Copy with the phase multiplied by ``factor`` (for negative tests)."""
        return replace(self, psi=self.psi * factor, grad=self.grad * factor,
                       psi_rr=self.psi_rr * factor, _splines={})

    def save(self, directory):
        from .io import write_field_file

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        meta = {"time_knots": [float(t) for t in self.time_knots], "T1": self.T1,
                "T_end": self.T_end, "c0": self.cutoff.c0, "coulomb": self.coulomb,
                "files": []}
        for k, t in enumerate(self.time_knots):
            rmax = float(self.r[k, -1])
            mesh = RadialGrid(4095, rmax * (1 + 1.0 / 4096))
            rr = mesh.radius
            a = self.psi_at(t, rr) + 1j * self.grad_at(t, rr)
            b = self.psi_rr_at(t, rr) + 0j
            fa, fb = f"phase_{k:03d}.fld", f"phase_rr_{k:03d}.fld"
            write_field_file(d / fa, mesh, a)
            write_field_file(d / fb, mesh, b)
            meta["files"].append([fa, fb])
        (d / "phase_table.json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, directory):
        from .io import read_field_file

        d = Path(directory)
        meta = json.loads((d / "phase_table.json").read_text())
        rows = {"r": [], "psi": [], "grad": [], "psi_rr": []}
        for fa, fb in meta["files"]:
            mesh, a = read_field_file(d / fa)
            _, b = read_field_file(d / fb)
            rows["r"].append(np.concatenate([[0.0], mesh.radius]))
            rows["psi"].append(np.concatenate([[a.real[0] - mesh.spacing * a.imag[0] / 2], a.real]))
            rows["grad"].append(np.concatenate([[0.0], a.imag]))
            rows["psi_rr"].append(np.concatenate([[b.real[0]], b.real]))
        arr = {k: np.array(v) for k, v in rows.items()}
        return cls(np.array(meta["time_knots"]), meta["T1"], meta["T_end"],
                   CutoffSpec(meta["c0"]), meta["coulomb"], arr["r"], arr["psi"],
                   arr["grad"], arr["psi_rr"], np.ones_like(arr["r"]))


def _launch_velocities(vmax, n, beta=5.0):
    s = np.linspace(0.0, 1.0, n)
    return vmax * np.sinh(beta * s) / np.sinh(beta)


def solve_phase(cut, T1, grid, time_knots, T_end=None, coulomb=True, n_traj=3000,
                dlog=2.5e-3, radius_needed=None):
    """Backward characteristics from ``T_end`` down to every knot.

    Raises :class:`CausticError` when the radial flow map stops being
    monotone, which signals a cutoff time ``T1`` that is too small.
    """
    knots = np.unique(np.asarray(time_knots, dtype=float))
    if knots.size == 0 or knots[0] < 1.0:
        raise DomainError("time knots must lie in [1, T_end]")
    if T1 <= 1:
        raise DomainError("T1 must exceed 1")
    T_end = float(knots[-1] if T_end is None else T_end)
    if knots[-1] > T_end * (1 + 1e-12):
        raise DomainError("time knots exceed T_end")
    rneed = coverage_radius(grid) if radius_needed is None else radius_needed
    vmax = 1.25 * rneed / knots[0] + 1.0
    for _ in range(6):
        try:
            table = _integrate(cut, T1, knots, T_end, coulomb, vmax, n_traj, dlog)
        except FloatingPointError as exc:
            raise NumericalFailure(str(exc)) from exc
        if np.all(table.r[:, -1] >= rneed):
            return table
        vmax *= 2.0
    raise NumericalFailure("characteristics fail to cover the grid")


def _integrate(cut, T1, knots, T_end, coulomb, vmax, n_traj, dlog):
    v = _launch_velocities(vmax, n_traj)
    X = v * T_end
    state = np.ascontiguousarray(np.stack([X, v, 0.5 * X * v, np.ones_like(X),
                                           np.full_like(X, 1.0 / T_end)]))
    nk = knots.size
    rows = np.empty((5, nk, n_traj))
    t_cur = T_end
    for k in range(nk - 1, -1, -1):
        t_next = knots[k]
        # advance in chunks so crossings between knots are caught
        while t_cur > t_next * (1 + 1e-14):
            t_stop = max(t_next, t_cur / 1.1)
            nsteps = max(1, int(math.ceil(math.log(t_cur / t_stop) / dlog)))
            kernels.integrate_characteristics(state, t_cur, t_stop, nsteps, cut.c0, T1, coulomb)
            _check_monotone(state, t_stop, T1)
            t_cur = t_stop
        t_cur = t_next
        rows[:, k, :] = state
    r, p, S, Jr, Jp = rows
    return PhaseTable(knots, float(T1), float(T_end), cut, bool(coulomb), r, S, p, Jp / Jr, Jr)


def _check_monotone(state, t, T1):
    r, Jr = state[0], state[3]
    if not np.all(np.isfinite(state)):
        raise CausticError(f"non-finite characteristic state at t={t:.4g} (T1={T1:g})")
    if np.any(Jr <= 0) or np.any(np.diff(r) <= 0):
        bad = float(r[np.argmin(Jr)])
        raise CausticError(f"characteristics cross near r={bad:.4g} at t={t:.4g} (T1={T1:g})")


@dataclass
class PhaseCertificate:
    """Gradient and Laplacian deviation gauges of a phase table from the free phase."""

    times: np.ndarray
    grad_deviation: np.ndarray
    lap_deviation: np.ndarray
    grad_constant: float
    lap_constant: float
    grad_budget: float
    lap_budget: float
    trend_ok: bool

    @property
    def passed(self):
        return (self.grad_constant <= self.grad_budget and self.lap_constant <= self.lap_budget)

    def as_dict(self):
        return {"grad_constant": self.grad_constant, "lap_constant": self.lap_constant,
                "grad_budget": self.grad_budget, "lap_budget": self.lap_budget,
                "trend_ok": self.trend_ok, "passed": self.passed}


def certify_phase(table, radius=None, grad_budget=5.0, lap_budget=50.0, n_samples=4001,
                  t_min=None):
    """Fit the constants in ``|grad psi - x/t| <= C/<t>`` and
    ``|lap psi - 3/t| <= C/<t>^2`` over the sampled knots.

    ``radius`` bounds the sup over ``x`` (default: the table coverage at the
    earliest knot). Knots below ``t_min`` are ignored.
    """
    times = table.time_knots
    if t_min is not None:
        times = times[times >= t_min * (1 - 1e-12)]
    g_dev, l_dev = [], []
    for t in times:
        k = table.index(t)
        R = table.r[k, -1] if radius is None else min(radius, table.r[k, -1])
        rr = np.linspace(0.0, R, n_samples)
        g_dev.append(np.max(np.abs(table.grad_at(t, rr) - rr / t)))
        l_dev.append(np.max(np.abs(table.laplacian_at(t, rr) - 3.0 / t)))
    g_dev, l_dev = np.array(g_dev), np.array(l_dev)
    bracket = np.sqrt(1.0 + times**2)
    Cg = float(np.max(bracket * g_dev)) if times.size else 0.0
    Cl = float(np.max(bracket**2 * l_dev)) if times.size else 0.0
    trend = bool(_non_increasing(g_dev) and _non_increasing(l_dev))
    return PhaseCertificate(times, g_dev, l_dev, Cg, Cl, grad_budget, lap_budget, trend)


def _non_increasing(x, rtol=1e-6):
    if x.size < 2:
        return True
    scale = max(np.max(np.abs(x)), 1e-300)
    return bool(np.all(np.diff(x) <= rtol * scale))


def probe_radii(radius, n=512, seed=0):
    """Radii of ``n`` scrambled-Sobol points in the ball ``|x| <= radius``."""
    pts = qmc.Sobol(d=3, scramble=True, seed=seed).random(n)
    # uniform in the ball via radial CDF inversion and sphere direction
    u = pts[:, 0]
    return radius * np.cbrt(u)


def hj_residual(cut, T1, grid, probe_times, T_end, radii, delta=None, coulomb=True, **solve_kw):
    """Finite-difference residual ``|d_t psi + |grad psi|^2/2 + V_T1|``.

    Independent of the characteristic identities: the time derivative comes
    from re-solving at ``t +- delta`` and the gradient from a centered
    difference of the interpolated phase in ``r``.
    """
    out = []
    radii = np.asarray(radii, dtype=float)
    for t in probe_times:
        dt = 1e-3 * t if delta is None else delta
        hi = min(t + dt, T_end)
        lo = hi - 2 * dt
        knots = sorted({lo, t, hi})
        tab = solve_phase(cut, T1, grid, knots, T_end=T_end, coulomb=coulomb, **solve_kw)
        dpsi_dt = (tab.psi_at(hi, radii) - tab.psi_at(lo, radii)) / (hi - lo)
        if hi - lo != 2 * dt or hi != t + dt:
            # one-sided at the terminal time: second-order backward stencil
            tab2 = solve_phase(cut, T1, grid, [t - 2 * dt, t - dt, t], T_end=T_end,
                               coulomb=coulomb, **solve_kw)
            dpsi_dt = (3 * tab2.psi_at(t, radii) - 4 * tab2.psi_at(t - dt, radii)
                       + tab2.psi_at(t - 2 * dt, radii)) / (2 * dt)
            tab = tab2
        h = 1e-4 * max(1.0, float(np.max(radii)))
        rp = radii + h
        rm = np.maximum(radii - h, 0.0)
        dpsi_dr = (tab.psi_at(t, rp) - tab.psi_at(t, rm)) / (rp - rm)
        V = kernels.potential_vt1(radii, t, cut.c0, T1, coulomb)[0]
        out.append(np.abs(dpsi_dt + 0.5 * dpsi_dr**2 + V))
    return np.array(out)


def select_T1(cut, grid, time_knots, T_end=None, grad_budget=5.0, lap_budget=50.0,
              max_doublings=8, coulomb=True, certify_t_min=None, **solve_kw):
    """Start at ``8 max(1, 4/c0)`` and double until the solve is caustic-free
    and the certification passes. Returns ``(T1, table, certificate)``."""
    T1 = 8.0 * max(1.0, 4.0 / cut.c0)
    last = None
    for _ in range(max_doublings + 1):
        try:
            table = solve_phase(cut, T1, grid, time_knots, T_end=T_end, coulomb=coulomb, **solve_kw)
        except CausticError as exc:
            last = exc
        else:
            cert = certify_phase(table, grad_budget=grad_budget, lap_budget=lap_budget,
                                 t_min=certify_t_min)
            if cert.passed:
                return T1, table, cert
            last = NumericalFailure(f"certification failed at T1={T1:g}: {cert.as_dict()}")
        T1 *= 2.0
    raise CausticError(f"no admissible T1 found: {last}")


def free_phase_table(grid, time_knots, T_end=None, cut=None):
    """Exact free phase ``|x|^2/2t`` as a table (reference and ablations)."""
    cut = cut or CutoffSpec(1.0)
    return solve_phase(cut, 2.0, grid, time_knots, T_end=T_end, coulomb=False, n_traj=64)


def check_grid(table, grid):
    if coverage_radius(grid) > np.min(table.r[:, -1]) * (1 + 1e-12):
        raise ContractViolation("phase table does not cover the grid")
