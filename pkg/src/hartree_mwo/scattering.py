"""Final-state problem: the map ``K``, the error term ``E``, the X norm,
Picard iteration and backward shooting.

With ``P(t <- s) = exp(-i (t - s) H)`` the integral equation reads

    u(t) = u_p(t) + K[u](t) + E(t),
    K[u](t) = i \\int_t^S P(t <- s) (F(u(s)) - F(u_p(s))) ds,
    E(t)    = i \\int_t^S P(t <- s) r(s) ds,   r = -(i d_s - H) u_p + F(u_p),

truncated at ``S = T_end``. On a knot set the tail integrals for every
knot come out of one backward sweep (trapezoidal in ``log s``):

    I_k = P(t_k <- t_{k+1}) [I_{k+1} + a_k g_{k+1}] + b_k g_k,

so each iteration costs one propagation across the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractViolation, DomainError, PicardDivergence
from .field_ops import DEFAULT_PAIRS, AdmissiblePair, TimeSeriesNorm, lebesgue_norm, mixed_norm
from .grid import ComplexField, check_same_grid
from .profile import build_profile, hartree_nonlinearity
from .propagator import EvolutionConfig, backward_propagate, linear_propagate


@dataclass(frozen=True)
class XNormSpec:
    T: float
    b: float
    pair: AdmissiblePair
    sample_times: tuple

    def __post_init__(self):
        if not 0.25 < self.b < 0.5:
            raise DomainError(f"b={self.b} outside (1/4, 1/2)")
        if self.T < 1:
            raise DomainError("T must be >= 1")
        ts = np.asarray(self.sample_times, dtype=float)
        if ts.size == 0:
            raise DomainError("empty sample_times")
        if np.any(ts < self.T * (1 - 1e-12)) or np.any(np.diff(ts) <= 0):
            raise DomainError("sample_times must be increasing and >= T")
        object.__setattr__(self, "sample_times", tuple(float(t) for t in ts))

    @classmethod
    def log_spaced(cls, T, T_end, n, b=0.45, pair=None):
        pair = pair or AdmissiblePair(4, 3)
        return cls(T, b, pair, tuple(np.geomspace(T, T_end, n)))


@dataclass
class DeficitSeries:
    """Per-knot ``L^2`` and ``L^r`` norms of ``u(t_k) - u_p(t_k)``."""

    times: np.ndarray
    l2: np.ndarray
    lr: dict

    @classmethod
    def from_fields(cls, times, fields, pairs=DEFAULT_PAIRS):
        l2 = np.array([lebesgue_norm(f, 2) for f in fields])
        lr = {p.r: np.array([lebesgue_norm(f, p.r) for f in fields]) for p in pairs}
        return cls(np.asarray(times, dtype=float), l2, lr)


def x_norm_parts(series, spec):
    """``(sup_k t^b ||d||_2, sup_k t^b ||d||_{L^q([t_k, T_end]; L^r)})``."""
    t = np.asarray(series.times, dtype=float)
    if t.size == 0:
        raise DomainError("empty deficit series")
    keep = t >= spec.T * (1 - 1e-12)
    t = t[keep]
    if t.size == 0:
        raise DomainError("deficit series does not reach T")
    l2 = np.asarray(series.l2)[keep]
    lr = np.asarray(series.lr[spec.pair.r])[keep]
    tb = t**spec.b
    part_l2 = float(np.max(tb * l2))
    if t.size == 1:
        # a single knot carries no time integral for finite q
        tail = lr if spec.pair.q == np.inf else np.zeros_like(lr)
        return part_l2, float(np.max(tb * tail))
    ts = TimeSeriesNorm(t, lr, spec.pair)
    mixed = np.array([mixed_norm(ts, tk) for tk in t])
    return part_l2, float(np.max(tb * mixed))


def x_norm(series, spec):
    """X-norm of a deficit series; the time integrals stop at the last knot."""
    a, b = x_norm_parts(series, spec)
    return a + b


@dataclass(frozen=True)
class Quadrature:
    """``kind="knots"``: trapezoid in ``log s`` on the given knots.
    ``kind="gauss_log"``: Gauss-Legendre in ``log s`` with ``n_nodes`` nodes
    on ``[t, s_max]`` (single-time evaluations)."""

    kind: str = "knots"
    n_nodes: int = 12
    s_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("knots", "gauss_log"):
            raise ConfigError(f"unknown quadrature kind {self.kind!r}")
        if self.kind == "gauss_log" and not 1 <= self.n_nodes <= 64:
            raise ConfigError("n_nodes must lie in [1, 64]")

    def nodes(self, t, s_max=None):
        s_max = self.s_max if s_max is None else s_max
        x, w = np.polynomial.legendre.leggauss(self.n_nodes)
        a, b = math.log(t), math.log(s_max)
        xi = 0.5 * (b - a) * x + 0.5 * (b + a)
        s = np.exp(xi)
        return s, 0.5 * (b - a) * w * s


def _series_fields(series):
    times = np.asarray([t for t, _ in series], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ContractViolation("series times must be strictly increasing")
    return times, [f for _, f in series]


def tail_sweep(times, integrand, cfg):
    """``i \\int_{t_k}^{t_last} P(t_k <- s) g(s) ds`` at every knot.

    ``integrand`` holds position-space fields ``g(t_k)``; the quadrature is
    trapezoidal in ``log s``.
    """
    times = np.asarray(times, dtype=float)
    n = times.size
    out = [None] * n
    grid = integrand[-1].grid
    acc = ComplexField(grid, np.zeros(grid.shape, complex))
    out[-1] = acc.copy()
    for k in range(n - 2, -1, -1):
        d = math.log(times[k + 1]) - math.log(times[k])
        moved = acc + integrand[k + 1] * (0.5 * d * times[k + 1])
        acc = linear_propagate(moved, times[k + 1], times[k], cfg) + integrand[k] * (0.5 * d * times[k])
        out[k] = acc * 1j
    out[-1] = out[-1] * 1j
    return out


def tail_direct(times, integrand, cfg, k):
    """Same quadrature as :func:`tail_sweep` at knot ``k``, one propagation per node."""
    times = np.asarray(times, dtype=float)
    tt = times[k:]
    if tt.size == 1:
        g = integrand[k].grid
        return ComplexField(g, np.zeros(g.shape, complex))
    s = np.log(tt)
    w = np.zeros_like(tt)
    w[:-1] += 0.5 * np.diff(s)
    w[1:] += 0.5 * np.diff(s)
    w *= tt
    acc = integrand[k] * w[0]
    for j in range(1, tt.size):
        acc = acc + linear_propagate(integrand[k + j], tt[j], tt[0], cfg) * w[j]
    return acc * 1j


def _profiles(ctx, times, grid):
    return [build_profile(ctx, t, grid) for t in times]


def apply_K(u_series, ctx, t=None, quad=None, cfg=None, profiles=None, nonlinear=True):
    """``K[u]`` at one knot (``t``) or at every knot (``t=None``).

    ``u_series`` is a list of ``(t_k, field)`` pairs on increasing knots
    reaching to the truncation time.
    """
    cfg = cfg or EvolutionConfig(dt=0.1)
    times, fields = _series_fields(u_series)
    grid = fields[0].grid
    ups = profiles if profiles is not None else _profiles(ctx, times, grid)
    if len(ups) != len(fields):
        raise ContractViolation("profile and series knots differ")
    for f, up in zip(fields, ups):
        check_same_grid(f.grid, up.grid)
    if nonlinear:
        g = [hartree_nonlinearity(u) - hartree_nonlinearity(up) for u, up in zip(fields, ups)]
    else:
        g = [ComplexField(grid, np.zeros(grid.shape, complex)) for _ in fields]
    if t is None:
        return tail_sweep(times, g, cfg)
    k = _knot_index(times, t)
    return tail_direct(times, g, cfg, k)


def _knot_index(times, t):
    k = np.nonzero(np.isclose(times, t, rtol=1e-12, atol=0))[0]
    if k.size == 0:
        raise ContractViolation(f"t={t} is not a knot of the series")
    return int(k[0])


def phase_times(times, delta):
    """Times at which the phase table must exist for residual evaluation."""
    out = set()
    for t in times:
        out.update((float(t), float(t - delta), float(t + delta)))
    return sorted(out)


def check_fd_step(times, delta):
    times = np.asarray(times, dtype=float)
    if delta <= 0:
        raise ConfigError("finite-difference step must be positive")
    if times.size > 1 and delta >= 0.5 * np.min(np.diff(times)):
        raise ConfigError("finite-difference step must be below half the knot spacing")
    if np.min(times) - delta < 1:
        raise ConfigError("finite-difference stencil reaches below t = 1")


def hamiltonian(u, cfg):
    """``-Delta u / 2 + V_c u`` with the configured softened potential."""
    g = u.grid
    out = 0.5 * g.multiply(u.values, g.k2)
    V = cfg.external_potential(g)
    if V is not None:
        out = out + V * u.values
    return ComplexField(g, out)


def profile_residual(ctx, s, delta, cfg, grid=None, nonlinear=True):
    """``r(s) = -(i d_s - H) u_p(s) + F(u_p(s))`` with a centered difference in ``s``."""
    grid = ctx.grid if grid is None else grid
    up = build_profile(ctx, s, grid)
    dup = (build_profile(ctx, s + delta, grid) - build_profile(ctx, s - delta, grid)) * (0.5 / delta)
    r = hamiltonian(up, cfg) - dup * 1j
    if nonlinear:
        r = r + hartree_nonlinearity(up)
    return r


def error_term(ctx, t=None, quad=None, cfg=None, delta=1e-3, times=None, grid=None,
               nonlinear=True):
    """``E`` at a single time by Gauss-Legendre in ``log s`` (``t`` given), or
    at every knot of ``times`` via the tail sweep."""
    cfg = cfg or EvolutionConfig(dt=0.1)
    grid = ctx.grid if grid is None else grid
    if t is not None:
        quad = quad or Quadrature("gauss_log")
        s_max = quad.s_max if quad.s_max is not None else getattr(ctx.phase, "T_end", None)
        if s_max is None:
            raise ConfigError("quadrature needs s_max")
        s, w = quad.nodes(t, s_max)
        check_fd_step(np.concatenate([[t], s]), delta) if s.size > 1 else check_fd_step(s, delta)
        acc = ComplexField(grid, np.zeros(grid.shape, complex))
        for sj, wj in zip(s, w):
            r = profile_residual(ctx, sj, delta, cfg, grid, nonlinear)
            acc = acc + linear_propagate(r, sj, t, cfg) * wj
        return acc * 1j
    times = np.asarray(times, dtype=float)
    check_fd_step(times, delta)
    res = [profile_residual(ctx, s, delta, cfg, grid, nonlinear) for s in times]
    return tail_sweep(times, res, cfg)


@dataclass
class FixedPointState:
    iterate_index: int
    times: np.ndarray
    deficit_field_series: list
    x_norm: float
    x_norm_history: list = field(default_factory=list)
    contraction_ratio: float | None = None
    ratio_history: list = field(default_factory=list)
    increment_norms: list = field(default_factory=list)
    iterates: list = field(default_factory=list, repr=False)

    def as_rows(self):
        rows = []
        for n, xn in enumerate(self.x_norm_history, start=1):
            ratio = self.ratio_history[n - 2] if n >= 2 and n - 2 < len(self.ratio_history) else ""
            rows.append((n, xn, self.increment_norms[n - 1], ratio))
        return rows


def _x_of(times, fields, spec, pairs):
    return x_norm(DeficitSeries.from_fields(times, fields, pairs), spec)


def picard_iterate(ctx, spec, n_iters, cfg=None, delta=None, nonlinear=True, growth_abort=10.0,
                   keep_iterates=False):
    """``u^{n+1} = u_p + K[u^n] + E`` on the knots of ``spec``.

    Raises :class:`PicardDivergence` when the deficit's X norm grows by
    ``growth_abort`` over one iterate.
    """
    if n_iters < 1:
        raise DomainError("n_iters must be >= 1")
    if len(spec.sample_times) > 16:
        raise ContractViolation("picard_iterate is a coarse check: at most 16 knots")
    cfg = cfg or EvolutionConfig(dt=0.1)
    times = np.asarray(spec.sample_times)
    if delta is None:
        delta = 0.25 * np.min(np.diff(times)) if times.size > 1 else 1e-3
    pairs = (AdmissiblePair(np.inf, 2), spec.pair)
    ups = _profiles(ctx, times, ctx.grid)
    E = error_term(ctx, times=times, cfg=cfg, delta=delta, nonlinear=nonlinear)
    u_prev = ups
    d_prev = [up * 0.0 for up in ups]
    x_prev = 0.0
    state = FixedPointState(0, times, d_prev, 0.0)
    inc_prev = None
    for n in range(1, n_iters + 1):
        K = apply_K(list(zip(times, u_prev)), ctx, cfg=cfg, profiles=ups, nonlinear=nonlinear)
        u_new = [up + k + e for up, k, e in zip(ups, K, E)]
        d_new = [u - up for u, up in zip(u_new, ups)]
        x_new = _x_of(times, d_new, spec, pairs)
        inc = _x_of(times, [a - b for a, b in zip(u_new, u_prev)], spec, pairs)
        state.iterate_index = n
        state.deficit_field_series = d_new
        state.x_norm = x_new
        state.x_norm_history.append(x_new)
        state.increment_norms.append(inc)
        if keep_iterates:
            state.iterates.append(u_new)
        if n >= 2:
            ratio = inc / inc_prev if inc_prev > 0 else (0.0 if inc == 0 else math.inf)
            state.ratio_history.append(ratio)
            state.contraction_ratio = ratio
        if not math.isfinite(x_new) or (x_prev > 0 and x_new > growth_abort * x_prev):
            raise PicardDivergence(
                f"X norm grew from {x_prev:.4g} to {x_new:.4g} at iterate {n}", state=state)
        if state.ratio_history and state.ratio_history[-1] > growth_abort:
            raise PicardDivergence(
                f"increment ratio {state.ratio_history[-1]:.4g} at iterate {n}", state=state)
        x_prev, inc_prev, u_prev = x_new, inc, u_new
    return state


@dataclass
class ConstructionResult:
    """Output of backward shooting: the field at ``t_out`` and deficit series."""

    u_out: ComplexField
    times: np.ndarray
    deficits: dict
    mass_series: np.ndarray
    leakage_series: np.ndarray
    leakage_flag: bool
    steps: int

    def series(self, name="full"):
        return self.deficits[name]


def modified_wave_operator(ctx, T_end, t_out, cfg, record_times=None, compare=None,
                           pairs=DEFAULT_PAIRS, nonlinear=True):
    """Backward shooting from ``u(T_end) = u_p(T_end)`` down to ``t_out``.

    ``compare`` maps names to extra profile contexts (ablations); the same
    trajectory is measured against each. The deficit against ``ctx`` is
    stored under ``"full"``.
    """
    if not 1 <= t_out <= T_end:
        raise DomainError("t_out must lie in [1, T_end]")
    grid = ctx.grid
    rec = sorted(set(float(t) for t in (record_times or ())) | {float(T_end), float(t_out)})
    contexts = {"full": ctx}
    contexts.update(compare or {})
    store = {name: {"l2": [], "lr": {p.r: [] for p in pairs}} for name in contexts}
    seen = []

    def measure(t, u):
        seen.append(t)
        for name, c in contexts.items():
            d = u - build_profile(c, t, grid)
            store[name]["l2"].append(lebesgue_norm(d, 2))
            for p in pairs:
                store[name]["lr"][p.r].append(lebesgue_norm(d, p.r))

    uT = build_profile(ctx, T_end, grid)
    run_cfg = replace(cfg, record_times=tuple(rec))
    traj = backward_propagate(uT, T_end, t_out, run_cfg, keep_states=False, on_record=measure,
                              nonlinear=nonlinear)
    order = np.argsort(seen)
    times = np.asarray(seen)[order]
    deficits = {}
    for name, s in store.items():
        deficits[name] = DeficitSeries(times, np.asarray(s["l2"])[order],
                                       {r: np.asarray(v)[order] for r, v in s["lr"].items()})
    return ConstructionResult(traj.final_state, times, deficits,
                              np.asarray(traj.mass_series)[order],
                              np.asarray(traj.leakage_series)[order], traj.leakage_flag, traj.steps)


def duhamel_residual(states, cfg, nonlinear=True):
    """Relative gap in ``u(t1) = P(t1<-t0) u(t0) - i \\int_{t0}^{t1} P(t1<-s) F(u(s)) ds``.

    ``states`` is an increasing list of ``(t, u(t))`` pairs from one
    trajectory; the integral uses the composite trapezoid on those samples.
    """
    times, fields = _series_fields(states)
    t0, t1 = times[0], times[-1]
    lin = linear_propagate(fields[0], t0, t1, cfg)
    w = np.zeros_like(times)
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    acc = lin
    if nonlinear:
        for tj, fj, wj in zip(times, fields, w):
            Fu = hartree_nonlinearity(fj)
            moved = Fu if tj == t1 else linear_propagate(Fu, tj, t1, cfg)
            acc = acc - moved * (1j * wj)
    num = lebesgue_norm(acc - fields[-1], 2)
    den = lebesgue_norm(fields[-1], 2)
    return num / den if den > 0 else num
