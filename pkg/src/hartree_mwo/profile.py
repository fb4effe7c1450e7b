"""Scattering datum, modified amplitude and the asymptotic profile.

The profile at time ``t >= 1`` is

    u_p(t) = M_psi(t) D(t) W(t),   W(t) = exp(-i V_+ log t) uhat_+,

with ``V_+ = (-Delta)^{-1} |uhat_+|^2``. The datum lives on its own grid
(its variable is a velocity ``x/t``), and ``D(t)`` resamples it onto the
physical grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import ContractViolation, DomainError
from .field_ops import DILATION_PHASE, dilate, lebesgue_norm, sobolev_norm
from .grid import (POSITION, ComplexField, Multiplier, RadialGrid, RealField, apply_multiplier,
                   inverse_laplacian)
from .hamilton_jacobi import CutoffSpec

DEFAULT_EPSILON0 = 0.1


@dataclass(frozen=True)
class ScatteringDatum:
    """``uhat_+`` sampled on its own grid, with its static potential cached."""

    uhat_plus: ComplexField
    c0: float
    h1_norm: float
    potential_sup: float
    static_potential: RealField = field(repr=False)
    epsilon0: float = DEFAULT_EPSILON0
    origin_support: bool = False

    @property
    def grid(self):
        return self.uhat_plus.grid

    @property
    def l2_norm(self):
        return lebesgue_norm(self.uhat_plus, 2)

    @classmethod
    def from_samples(cls, uhat, c0, epsilon0=DEFAULT_EPSILON0, allow_origin_support=False):
        """Validate the support and smallness hypotheses and cache ``V_+``.

        ``allow_origin_support`` skips the vanishing check near the origin;
        the datum is then tagged so reports can flag the run.
        """
        if uhat.space != POSITION:
            raise ContractViolation("datum samples must be position-space")
        if not c0 > 0:
            raise DomainError("c0 must be positive")
        inner = uhat.grid.radius < c0
        if not allow_origin_support and np.any(uhat.values[np.broadcast_to(inner, uhat.grid.shape)] != 0):
            raise ContractViolation(f"datum does not vanish on |x| < c0 = {c0}")
        V = inverse_laplacian(RealField(uhat.grid, np.abs(uhat.values) ** 2))
        sup = float(np.max(np.abs(V.values)))
        if sup > epsilon0:
            raise ContractViolation(f"potential_sup {sup:.4g} exceeds smallness threshold {epsilon0:g}")
        h1 = sobolev_norm(uhat, 1.0)
        return cls(uhat, float(c0), h1, sup, V, float(epsilon0), bool(allow_origin_support))

    def potential_at(self, out_grid, scale):
        """``V_+(x/scale)`` on ``out_grid``.

        The monopole ``m erf(|y|/a)/|y|`` is split off and evaluated in
        closed form; only the fast-decaying remainder is interpolated, which
        keeps the non-periodic ``1/|y|`` tail out of the trigonometric
        interpolant.
        """
        a = self._monopole_width
        mass = self.grid.integrate(np.abs(self.uhat_plus.values) ** 2)
        rest = self.static_potential.values - mass * _erf_over_r(self.grid.radius, a)
        out = self.grid.resample(rest, out_grid, scale)
        return out + mass * _erf_over_r(out_grid.radius / scale, a)

    @property
    def _monopole_width(self):
        return max(0.5 * self.c0, 8.0 * self.grid.spacing)

    def scaled(self, factor, epsilon0=None):
        eps = self.epsilon0 if epsilon0 is None else epsilon0
        return ScatteringDatum.from_samples(self.uhat_plus * factor, self.c0, eps, self.origin_support)


def _erf_over_r(r, a):
    r = np.asarray(r, dtype=float)
    small = r < 1e-8 * a
    rr = np.where(small, 1.0, r)
    return np.where(small, 2.0 / (math.sqrt(math.pi) * a), special.erf(rr / a) / rr)


def annulus_profile(grid, rho, sigma, c0):
    """``exp(-(|x|-rho)^2/sigma^2)`` hard-truncated to ``|x| >= c0``."""
    r = grid.radius
    g = np.exp(-((r - rho) ** 2) / sigma**2)
    return np.broadcast_to(np.where(r >= c0, g, 0.0), grid.shape).astype(complex)


def annulus_datum(grid, c0, rho, sigma, potential_sup=0.05, amplitude=None,
                  epsilon0=DEFAULT_EPSILON0, allow_origin_support=False):
    """Annular Gaussian datum with amplitude fixed by ``potential_sup``.

    ``V_+`` is quadratic in the amplitude, so one unit solve fixes it.
    Passing ``amplitude`` overrides the normalization.
    """
    shape = annulus_profile(grid, rho, sigma, c0)
    if amplitude is None:
        V1 = inverse_laplacian(RealField(grid, np.abs(shape) ** 2)).values
        amplitude = math.sqrt(potential_sup / float(np.max(V1)))
    eps = max(epsilon0, (1 + 1e-9) * potential_sup)
    return ScatteringDatum.from_samples(ComplexField(grid, amplitude * shape), c0, eps,
                                        allow_origin_support)


def zero_datum(grid, c0):
    return ScatteringDatum.from_samples(ComplexField(grid, np.zeros(grid.shape, complex)), c0)


@dataclass(frozen=True)
class ProfileContext:
    """Everything the profile needs at a given time.

    ``phase`` is a :class:`PhaseTable`; ``phase_mode="free"`` replaces it by
    ``|x|^2/2t`` and ``log_phase=False`` drops the log correction (the two
    ablations).
    """

    datum: ScatteringDatum
    phase: object
    grid: object
    b: float = 0.45
    T1: float = None
    log_phase: bool = True
    phase_mode: str = "hj"

    def __post_init__(self):
        if not 0.25 < self.b < 0.5:
            raise DomainError(f"b={self.b} outside (1/4, 1/2)")
        T1 = self.T1 if self.T1 is not None else getattr(self.phase, "T1", None)
        if T1 is None:
            T1 = 2.0
        if not T1 > 1:
            raise DomainError("T1 must exceed 1")
        object.__setattr__(self, "T1", float(T1))
        if self.phase_mode not in ("hj", "free"):
            raise DomainError(f"unknown phase mode {self.phase_mode!r}")
        if self.phase_mode == "hj" and self.phase is None:
            raise ContractViolation("phase_mode='hj' needs a phase table")
        if isinstance(self.grid, RadialGrid) != isinstance(self.datum.grid, RadialGrid):
            raise ContractViolation("datum and physical grid must share a geometry")

    def variant(self, **changes):
        return replace(self, **changes)

    @property
    def cutoff(self):
        return CutoffSpec(self.datum.c0)

    def psi(self, t, grid=None):
        grid = self.grid if grid is None else grid
        if self.phase_mode == "free":
            return RealField(grid, np.broadcast_to(grid.radius**2 / (2.0 * t), grid.shape))
        return self.phase.psi_field(t, grid)


def hartree_nonlinearity(u):
    """``F(u) = ((-Delta)^{-1}|u|^2) u``."""
    if u.space != POSITION:
        raise ContractViolation("hartree_nonlinearity acts on position-space fields")
    V = inverse_laplacian(RealField(u.grid, np.abs(u.values) ** 2))
    return ComplexField(u.grid, V.values * u.values)


def _check_time(t):
    if not t >= 1:
        raise DomainError(f"profile regime is t >= 1, got t={t}")


def build_W(ctx, t):
    """``exp(-i V_+ log t) uhat_+`` on the datum grid."""
    _check_time(t)
    d = ctx.datum
    if not ctx.log_phase:
        return d.uhat_plus.copy()
    return ComplexField(d.grid, np.exp(-1j * d.static_potential.values * math.log(t))
                        * d.uhat_plus.values)


def _phase_factor(ctx, t, grid):
    return np.exp(1j * ctx.psi(t, grid).values)


def build_profile(ctx, t, grid=None):
    """``M_psi(t) D(t) W(t)`` on the physical grid."""
    grid = ctx.grid if grid is None else grid
    _check_time(t)
    if ctx.phase_mode == "hj" and not ctx.phase.covers(t):
        raise DomainError(f"phase table does not cover t={t}")
    DW = dilate(build_W(ctx, t), t, out_grid=grid)
    return ComplexField(grid, _phase_factor(ctx, t, grid) * DW.values)


def build_profile_direct(ctx, t, grid=None):
    """Pointwise formula ``(it)^{-3/2} e^{i psi} e^{-i V_+(x/t) log t} uhat_+(x/t)``.

    Resamples ``V_+`` and ``uhat_+`` separately, so agreement with
    :func:`build_profile` checks the factorization through ``W``.
    """
    grid = ctx.grid if grid is None else grid
    _check_time(t)
    d = ctx.datum
    u_at = d.grid.resample(d.uhat_plus.values, grid, t)
    pref = DILATION_PHASE * t**-1.5
    if ctx.log_phase:
        V_at = d.potential_at(grid, t)
        u_at = np.exp(-1j * V_at * math.log(t)) * u_at
    return ComplexField(grid, pref * _phase_factor(ctx, t, grid) * u_at)


def _rel_l2(a, b, grid):
    den = math.sqrt(grid.integrate(np.abs(b) ** 2))
    num = math.sqrt(grid.integrate(np.abs(a - b) ** 2))
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def profile_nonlinearity_identity(ctx, t, grid=None):
    """Relative L2 gap between ``F(u_p)`` and ``M_psi D(t) t^{-1} F(W)``."""
    grid = ctx.grid if grid is None else grid
    up = build_profile(ctx, t, grid)
    lhs = hartree_nonlinearity(up)
    FW = hartree_nonlinearity(build_W(ctx, t)) * (1.0 / t)
    rhs = _phase_factor(ctx, t, grid) * dilate(FW, t, out_grid=grid).values
    return _rel_l2(lhs.values, rhs, grid)


def potential_scaling_identity(ctx, t, radius=None, grid=None):
    """Sup-relative gap between ``(-Delta)^{-1}|u_p(t)|^2`` and ``t^{-1} V_+(x/t)``.

    The sup is over ``|x| <= radius`` (default: half the box).
    """
    grid = ctx.grid if grid is None else grid
    up = build_profile(ctx, t, grid)
    lhs = inverse_laplacian(RealField(grid, np.abs(up.values) ** 2)).values
    rhs = ctx.datum.potential_at(grid, t) / t
    R = 0.5 * grid.extent if radius is None else radius
    mask = np.broadcast_to(grid.radius <= R, grid.shape)
    scale = np.max(np.abs(rhs[mask]))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)[mask]) / scale)


def decompose_U(ctx, t, j, f, grid=None, modulation=True, enforce_regime=True):
    """Apply ``U_j(t)`` to a datum-grid field ``f``.

    ``U_1 = M_psi D F(1-M)F^{-1}``, ``U_2 = chi(x/t) M_psi D F M F^{-1}``,
    ``U_3 = (1-chi(x/t)) M_psi D F M F^{-1}``. On the datum grid
    ``F M(t) F^{-1}`` is the multiplier ``exp(i|k|^2/2t)``.
    ``modulation=False`` replaces ``M`` by 1 in ``U_2``/``U_3``.
    """
    if j not in (1, 2, 3):
        raise DomainError(f"U_j needs j in {{1, 2, 3}}, got {j}")
    grid = ctx.grid if grid is None else grid
    if enforce_regime and j in (2, 3) and t < 2 * ctx.T1:
        raise DomainError(f"U_{j} cutoff semantics need t >= 2 T1 = {2 * ctx.T1:g}")
    mod = Multiplier(f.grid, lambda k2: np.exp(0.5j * k2 / t))
    if j == 1:
        g = f - apply_multiplier(f, mod)
    elif modulation:
        g = apply_multiplier(f, mod)
    else:
        g = f
    out = _phase_factor(ctx, t, grid) * dilate(g, t, out_grid=grid).values
    if j > 1:
        chi = np.broadcast_to(ctx.cutoff.chi(grid.radius / t), grid.shape)
        out = out * (chi if j == 2 else 1.0 - chi)
    return ComplexField(grid, out)


def no_log_deficit_oracle(datum, t):
    """Closed form ``||(exp(-i V_+ log t) - 1) uhat_+||_{L2}``."""
    V = datum.static_potential.values
    diff = (np.exp(-1j * V * math.log(t)) - 1.0) * datum.uhat_plus.values
    return math.sqrt(datum.grid.integrate(np.abs(diff) ** 2))
