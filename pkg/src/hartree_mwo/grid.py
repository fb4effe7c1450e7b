"""Discretized domains, unitary Fourier transforms and the Coulomb convolution.

Two geometries share one duck-typed interface:

* :class:`GridSpec` -- the periodic cube ``[-L, L)^3`` sampled with ``n``
  points per axis. Transforms are 3D FFTs.
* :class:`RadialGrid` -- spherically symmetric fields on the ball
  ``|x| < R`` with a Dirichlet wall, sampled at ``r_j = j*dr``. Transforms
  are type-I sine transforms of ``r*u``. Used when the scattering datum is
  radial and the time window needs boxes far beyond desk-scale 3D grids.

Fourier convention (both geometries): angular frequency, unitary,

    f_hat(xi) = (2 pi)^{-3/2} \\int f(x) exp(-i x.xi) dx,

so the Coulomb kernel ``1/|x|`` corresponds to the symbol ``4 pi/|xi|^2``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy import special

from .errors import ContractViolation, DomainError

POSITION = "position"
FREQUENCY = "frequency"

# Fraction of the half-width beyond which mass counts as leaked.
LEAKAGE_RADIUS_FRACTION = 0.75


def _fft_workers():
    return -1


@dataclass(frozen=True)
class GridSpec:
    """Periodic cube ``[-L, L)^3`` with ``n`` samples per axis."""

    n_per_axis: int
    box_half_width: float

    ndim = 3
    kind = "cubic"

    def __post_init__(self):
        if int(self.n_per_axis) != self.n_per_axis or self.n_per_axis < 4:
            raise DomainError(f"n_per_axis must be an integer >= 4, got {self.n_per_axis}")
        if self.n_per_axis % 2:
            raise DomainError("n_per_axis must be even")
        if not self.box_half_width > 0:
            raise DomainError("box_half_width must be positive")

    @property
    def n(self):
        return self.n_per_axis

    @property
    def extent(self):
        """Half-width ``L`` of the sampled region."""
        return self.box_half_width

    @property
    def shape(self):
        return (self.n_per_axis,) * 3

    @property
    def spacing(self):
        return 2.0 * self.box_half_width / self.n_per_axis

    @property
    def cell_volume(self):
        return self.spacing**3

    @property
    def freq_cell_volume(self):
        return (np.pi / self.box_half_width) ** 3

    @cached_property
    def axis(self):
        return -self.box_half_width + self.spacing * np.arange(self.n_per_axis)

    @cached_property
    def wavenumbers(self):
        """Angular wavenumbers ``pi k / L`` in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_per_axis, d=self.spacing)

    @cached_property
    def coords(self):
        a = self.axis
        return a[:, None, None], a[None, :, None], a[None, None, :]

    @cached_property
    def radius(self):
        x, y, z = self.coords
        return np.sqrt(x * x + y * y + z * z)

    @cached_property
    def k2(self):
        k = self.wavenumbers
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2

    @cached_property
    def _shift_sign(self):
        # exp(i xi_k L) = (-1)^k because the first sample sits at -L
        s = np.where(np.round(np.fft.fftfreq(self.n_per_axis) * self.n_per_axis) % 2, -1.0, 1.0)
        return s[:, None, None] * s[None, :, None] * s[None, None, :]

    def integrate(self, values):
        return self.cell_volume * np.sum(values)

    def integrate_freq(self, values):
        return self.freq_cell_volume * np.sum(values)

    def to_freq(self, values):
        c = (self.spacing / np.sqrt(2.0 * np.pi)) ** 3
        return c * self._shift_sign * sfft.fftn(values, workers=_fft_workers())

    def from_freq(self, values):
        c = (np.sqrt(2.0 * np.pi) / self.spacing) ** 3
        return c * sfft.ifftn(self._shift_sign * values, workers=_fft_workers())

    def multiply(self, values, symbol):
        """Apply a Fourier multiplier to position-space samples."""
        out = sfft.ifftn(symbol * sfft.fftn(values, workers=_fft_workers()), workers=_fft_workers())
        return out

    def coulomb(self, rho):
        """Free-space ``\\int rho(y)/|x-y| dy`` for ``rho`` supported in the box."""
        n = self.n_per_axis
        khat = _cubic_coulomb_kernel(self)
        pad = np.zeros((2 * n,) * 3)
        pad[:n, :n, :n] = rho
        out = sfft.irfftn(sfft.rfftn(pad, workers=_fft_workers()) * khat, s=pad.shape,
                          workers=_fft_workers())
        return out[:n, :n, :n]

    def coulomb_periodic(self, rho):
        """Periodic solve with the symbol ``4 pi/|xi|^2`` and the zero mode dropped."""
        k2 = self.k2
        with np.errstate(divide="ignore"):
            sym = np.where(k2 > 0, 4.0 * np.pi / np.where(k2 > 0, k2, 1.0), 0.0)
        return self.multiply(rho, sym).real

    def leakage_mask(self):
        return self.radius > LEAKAGE_RADIUS_FRACTION * self.box_half_width

    def resample(self, values, out_grid, scale):
        """Band-limited samples of ``f(x/scale)`` at the points of ``out_grid``.

        ``values`` is read as the trigonometric interpolant on this grid,
        restricted to one period; points landing outside the box get 0.
        """
        if not isinstance(out_grid, GridSpec):
            raise ContractViolation("cubic fields resample onto cubic grids only")
        e = _interp_matrix(self, out_grid.axis / scale)
        re = _apply_separable(e, np.real(values))
        if np.iscomplexobj(values):
            return re + 1j * _apply_separable(e, np.imag(values))
        return re


def _interp_matrix(grid, points):
    xi = grid.wavenumbers
    a = np.exp(1j * np.outer(points, xi))
    b = np.exp(-1j * np.outer(xi, grid.axis))
    e = (a @ b).real / grid.n_per_axis
    L = grid.box_half_width
    outside = (points < -L) | (points >= L)
    e[outside] = 0.0
    return e


def _apply_separable(e, f):
    g = np.tensordot(e, f, axes=(1, 0))
    g = np.tensordot(g, e, axes=(1, 1))
    g = np.tensordot(g, e, axes=(1, 1))
    return g


def truncated_coulomb_kernel(r, kmax, rcut):
    """Radial profile of the band-limited, truncated Coulomb kernel.

    Inverse transform of ``4 pi (1 - cos(rcut |xi|))/|xi|^2`` over the ball
    ``|xi| < kmax``; equals ``1/|x|`` convolved against any density whose
    spectrum lies in that ball, for separations below ``rcut``.
    """
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    zero = r == 0.0
    rz = np.where(zero, 1.0, r)
    si_a, _ = special.sici(kmax * rz)
    si_b, _ = special.sici(kmax * (rz + rcut))
    si_c, _ = special.sici(kmax * (rz - rcut))
    out[...] = 2.0 / (np.pi * rz) * (si_a - 0.5 * si_b - 0.5 * si_c)
    out[zero] = 2.0 / np.pi * (kmax - np.sin(kmax * rcut) / rcut)
    return out


@functools.lru_cache(maxsize=4)
def _cubic_coulomb_kernel(grid):
    n = grid.n_per_axis
    h = grid.spacing
    d = np.fft.fftfreq(2 * n, d=1.0 / (2 * n)) * h
    r = np.sqrt(d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2)
    rcut = 2.0 * np.sqrt(3.0) * grid.box_half_width
    kern = truncated_coulomb_kernel(r, np.pi / h, rcut)
    return sfft.rfftn(kern, workers=_fft_workers()) * h**3


@dataclass(frozen=True)
class RadialGrid:
    """Spherically symmetric fields on ``0 < r < R`` (Dirichlet at ``R``)."""

    n_points: int
    radius_max: float

    ndim = 1
    kind = "radial"

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 4:
            raise DomainError("n_points must be an integer >= 4")
        if not self.radius_max > 0:
            raise DomainError("radius_max must be positive")

    @property
    def n(self):
        return self.n_points

    @property
    def extent(self):
        return self.radius_max

    @property
    def shape(self):
        return (self.n_points,)

    @property
    def spacing(self):
        return self.radius_max / (self.n_points + 1)

    @cached_property
    def radius(self):
        return self.spacing * np.arange(1, self.n_points + 1)

    @cached_property
    def wavenumbers(self):
        return np.pi / self.radius_max * np.arange(1, self.n_points + 1)

    @cached_property
    def k2(self):
        return self.wavenumbers**2

    @cached_property
    def weights(self):
        return 4.0 * np.pi * self.radius**2 * self.spacing

    @cached_property
    def freq_weights(self):
        return 4.0 * np.pi * self.k2 * (np.pi / self.radius_max)

    def integrate(self, values):
        return np.sum(self.weights * values)

    def integrate_freq(self, values):
        return np.sum(self.freq_weights * values)

    def _dst(self, v):
        return sfft.dst(v, type=1, workers=_fft_workers())

    def _idst(self, v):
        return sfft.idst(v, type=1, workers=_fft_workers())

    def to_freq(self, values):
        s = 0.5 * self.spacing * self._dst(self.radius * values)
        return np.sqrt(2.0 / np.pi) * s / self.wavenumbers

    def from_freq(self, values):
        k = self.wavenumbers
        dk = np.pi / self.radius_max
        v = self._dst(k * values) * 0.5
        return np.sqrt(2.0 / np.pi) * dk * v / self.radius

    def multiply(self, values, symbol):
        r = self.radius
        return self._idst(symbol * self._dst(r * values)) / r

    def coulomb(self, rho):
        """Free-space potential: Dirichlet solve plus the exterior monopole."""
        r = self.radius
        v = self._idst(4.0 * np.pi / self.k2 * self._dst(r * rho)) / r
        return v + self.integrate(rho) / self.radius_max

    def coulomb_periodic(self, rho):
        return self.coulomb(rho)

    def leakage_mask(self):
        return self.radius > LEAKAGE_RADIUS_FRACTION * self.radius_max

    def resample(self, values, out_grid, scale):
        if not isinstance(out_grid, RadialGrid):
            raise ContractViolation("radial fields resample onto radial grids only")
        pts = out_grid.radius / scale
        coef = self._dst(self.radius * values) / (self.n_points + 1)
        s = np.sin(np.outer(pts, self.wavenumbers))
        out = (s @ coef) / pts
        out[pts >= self.radius_max] = 0.0
        return out


def check_same_grid(a, b):
    if a != b:
        raise ContractViolation(f"grid mismatch: {a} vs {b}")


@dataclass
class ComplexField:
    """Complex samples on a grid, tagged with the space they live in."""

    grid: object
    values: np.ndarray
    space: str = POSITION

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ContractViolation(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.space not in (POSITION, FREQUENCY):
            raise ContractViolation(f"unknown space flag {self.space!r}")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("field contains non-finite samples")

    def copy(self):
        return ComplexField(self.grid, self.values.copy(), self.space)

    def __add__(self, other):
        _check_compatible(self, other)
        return ComplexField(self.grid, self.values + other.values, self.space)

    def __sub__(self, other):
        _check_compatible(self, other)
        return ComplexField(self.grid, self.values - other.values, self.space)

    def __mul__(self, scalar):
        return ComplexField(self.grid, self.values * scalar, self.space)

    __rmul__ = __mul__


@dataclass
class RealField:
    grid: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ContractViolation("values shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("field contains non-finite samples")


def _check_compatible(a, b):
    check_same_grid(a.grid, b.grid)
    if a.space != b.space:
        raise ContractViolation("cannot combine position and frequency fields")


def forward_transform(f):
    """Unitary transform of a position-space field."""
    if f.space != POSITION:
        raise ContractViolation("forward_transform expects a position-space field")
    return ComplexField(f.grid, f.grid.to_freq(f.values), FREQUENCY)


def inverse_transform(f):
    if f.space != FREQUENCY:
        raise ContractViolation("inverse_transform expects a frequency-space field")
    return ComplexField(f.grid, f.grid.from_freq(f.values), POSITION)


class Multiplier:
    """A Fourier symbol sampled on a grid's wavenumber lattice.

    ``symbol`` is an array in the grid's frequency layout, or a callable of
    ``|xi|^2`` (every symbol used here is radial).
    """

    def __init__(self, grid, symbol):
        if callable(symbol):
            symbol = symbol(grid.k2)
        values = np.broadcast_to(np.asarray(symbol), grid.shape)
        if not np.all(np.isfinite(values)):
            raise DomainError("multiplier symbol is not finite on the lattice")
        self.grid = grid
        self.values = values

    def __mul__(self, other):
        check_same_grid(self.grid, other.grid)
        return Multiplier(self.grid, self.values * other.values)


def apply_multiplier(f, m):
    if not isinstance(m, Multiplier):
        m = Multiplier(f.grid, m)
    check_same_grid(f.grid, m.grid)
    if f.space == FREQUENCY:
        return ComplexField(f.grid, m.values * f.values, FREQUENCY)
    return ComplexField(f.grid, f.grid.multiply(f.values, m.values), POSITION)


def inverse_laplacian(rho, method="free", negative_tol=1e-10):
    """``\\int rho(y)/|x-y| dy`` for a nonnegative density.

    ``method="free"`` gives the free-space convolution (truncated-kernel
    method for the cube, exact monopole closure for radial grids);
    ``method="periodic"`` drops the zero mode of ``4 pi/|xi|^2``.
    """
    values = np.asarray(rho.values if hasattr(rho, "values") else rho, dtype=float)
    grid = rho.grid
    scale = max(np.max(np.abs(values)), 1e-300)
    if np.min(values) < -negative_tol * scale:
        raise ContractViolation("density has negative entries beyond tolerance")
    if method == "free":
        out = grid.coulomb(values)
    elif method == "periodic":
        out = grid.coulomb_periodic(values)
    else:
        raise ContractViolation(f"unknown method {method!r}")
    return RealField(grid, out)


def leakage_fraction(grid, values):
    """Fraction of the squared L2 mass beyond 0.75 of the half-width."""
    dens = np.abs(values) ** 2
    total = grid.integrate(dens)
    if total == 0:
        return 0.0
    return float(grid.integrate(np.where(grid.leakage_mask(), dens, 0.0)) / total)
