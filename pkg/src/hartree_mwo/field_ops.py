"""Dilation and modulation operators, and the norm library.

The operators follow the usual conventions for the pseudo-conformal
factorization of the free group:

    [D(t) f](x)   = (i t)^{-3/2} f(x/t)
    [M(t) f](x)   = exp(i |x|^2 / 2t) f(x)
    [M_psi f](x)  = exp(i psi(x)) f(x)

``(i t)^{-3/2}`` is taken on the principal branch, i.e.
``exp(-3 pi i/4) t^{-3/2}`` for ``t > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ContractViolation, DomainError
from .grid import POSITION, ComplexField, check_same_grid, forward_transform

DILATION_PHASE = np.exp(-0.75j * np.pi)


def _as_fraction(x):
    if x == np.inf:
        return None
    return Fraction(x).limit_denominator(10**6)


@dataclass(frozen=True)
class AdmissiblePair:
    """Strichartz exponents with ``2/q + 3/r = 3/2`` and ``2 <= q, r <= inf``."""

    q: float
    r: float

    def __post_init__(self):
        for name, v in (("q", self.q), ("r", self.r)):
            if not (v == np.inf or 2 <= v < np.inf):
                raise DomainError(f"{name}={v} outside [2, inf]")
        fq, fr = _as_fraction(self.q), _as_fraction(self.r)
        total = (2 / fq if fq is not None else 0) + (3 / fr if fr is not None else 0)
        if total != Fraction(3, 2):
            raise DomainError(f"(q, r)=({self.q}, {self.r}) is not admissible")

    def label(self):
        q = "inf" if self.q == np.inf else f"{self.q:g}"
        return f"({q},{self.r:g})"


DEFAULT_PAIRS = (AdmissiblePair(np.inf, 2), AdmissiblePair(4, 3), AdmissiblePair(2, 6))


@dataclass
class TimeSeriesNorm:
    """Per-time ``L^r`` norms sampled at increasing times."""

    times: np.ndarray
    values: np.ndarray
    pair: AdmissiblePair

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ContractViolation("times and values must be matching 1D arrays")
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation("times must be strictly increasing")
        if np.any(self.values < 0):
            raise ContractViolation("norm values must be nonnegative")


def dilate(f, t, out_grid=None):
    """``(i t)^{-3/2} f(x/t)`` sampled on ``out_grid`` (default: ``f.grid``)."""
    if not t > 0:
        raise DomainError(f"dilation needs t > 0, got {t}")
    if f.space != POSITION:
        raise ContractViolation("dilate acts on position-space fields")
    out_grid = f.grid if out_grid is None else out_grid
    vals = f.grid.resample(f.values, out_grid, t)
    return ComplexField(out_grid, DILATION_PHASE * t**-1.5 * vals)


def modulate_quadratic(f, t):
    if t == 0:
        raise DomainError("M(t) is undefined at t = 0")
    r2 = f.grid.radius**2
    return ComplexField(f.grid, np.exp(0.5j * r2 / t) * f.values, f.space)


def modulate_phase(f, psi):
    check_same_grid(f.grid, psi.grid)
    return ComplexField(f.grid, np.exp(1j * psi.values) * f.values, f.space)


def lebesgue_norm(f, r):
    """Riemann-sum ``L^r`` norm; ``r = inf`` gives the max modulus."""
    if not r >= 1:
        raise DomainError(f"L^r norm needs r >= 1, got {r}")
    vals = f.values if hasattr(f, "values") else f
    grid = f.grid
    a = np.abs(vals)
    if r == np.inf:
        return float(a.max()) if a.size else 0.0
    if f.space != POSITION:
        return float(grid.integrate_freq(a**r) ** (1.0 / r))
    return float(grid.integrate(a**r) ** (1.0 / r))


def sobolev_norm(f, s):
    """Spectral ``H^s`` norm ``|| <xi>^s f_hat ||_{L^2}``."""
    if s < 0:
        raise DomainError("sobolev_norm needs s >= 0")
    fh = f if f.space != POSITION else forward_transform(f)
    w = (1.0 + fh.grid.k2) ** s
    return float(np.sqrt(fh.grid.integrate_freq(w * np.abs(fh.values) ** 2)))


def trapezoid_weights(times):
    """Plain trapezoidal weights in ``t`` for (typically log-spaced) knots."""
    t = np.asarray(times, dtype=float)
    w = np.zeros_like(t)
    if t.size > 1:
        dt = np.diff(t)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def log_trapezoid_weights(times):
    """Weights ``w`` with ``sum w_j g(t_j) ~ \\int g dt``, trapezoidal in ``log t``."""
    t = np.asarray(times, dtype=float)
    if t.size == 1:
        return np.zeros(1)
    s = np.log(t)
    ds = np.diff(s)
    w = np.zeros_like(t)
    w[:-1] += 0.5 * ds
    w[1:] += 0.5 * ds
    return w * t


def mixed_norm(series, t_start):
    """Truncated ``L^q([t_start, t_end]; L^r)`` norm of a sampled series.

    The tail beyond the last sample is treated as zero. When ``t_start``
    falls between samples the first value is interpolated log-log.
    """
    t, v = series.times, series.values
    if not (t[0] <= t_start <= t[-1]):
        raise DomainError(f"t_start={t_start} outside sampled range [{t[0]}, {t[-1]}]")
    keep = t >= t_start
    tt, vv = t[keep], v[keep]
    if tt.size == 0:
        raise DomainError("empty restriction")
    if tt[0] > t_start:
        j = np.searchsorted(t, t_start)
        lo, hi = v[j - 1], v[j]
        if lo > 0 and hi > 0:
            w = (np.log(t_start) - np.log(t[j - 1])) / (np.log(t[j]) - np.log(t[j - 1]))
            v0 = np.exp((1 - w) * np.log(lo) + w * np.log(hi))
        else:
            v0 = lo + (hi - lo) * (t_start - t[j - 1]) / (t[j] - t[j - 1])
        tt = np.concatenate([[t_start], tt])
        vv = np.concatenate([[v0], vv])
    q = series.pair.q
    if q == np.inf:
        return float(vv.max())
    return float(np.dot(trapezoid_weights(tt), vv**q) ** (1.0 / q))
