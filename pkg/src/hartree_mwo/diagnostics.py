"""Decay fits, ablations, truncated Strichartz ratios and inequality audits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .field_ops import (DEFAULT_PAIRS, AdmissiblePair, TimeSeriesNorm, lebesgue_norm, mixed_norm,
                        sobolev_norm)
from .grid import ComplexField, GridSpec, RealField, inverse_laplacian
from .io import csv_text
from .profile import no_log_deficit_oracle
from .propagator import EvolutionConfig, linear_trajectory
from .scattering import modified_wave_operator


def fit_decay(times, values, min_points=6):
    """OLS fit of ``log value`` against ``log t``: ``(slope, intercept, rms residual)``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise DomainError("times and values must be matching 1D arrays")
    if t.size < min_points:
        raise DomainError(f"fit needs at least {min_points} points, got {t.size}")
    if np.any(v <= 0) or np.any(t <= 0):
        raise DomainError("fit_decay needs positive times and values")
    x, y = np.log(t), np.log(v)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def log_knots(t_lo, t_hi, per_decade=12):
    n = max(2, int(round(per_decade * math.log10(t_hi / t_lo))) + 1)
    return np.geomspace(t_lo, t_hi, n)


def tail_mixed_series(times, lr_values, pair):
    """``||d||_{L^q([t_k, t_last]; L^r)}`` at every knot."""
    ts = TimeSeriesNorm(times, lr_values, pair)
    return np.array([mixed_norm(ts, t) for t in times])


@dataclass
class DecayReport:
    times: np.ndarray
    l2_deficit: np.ndarray
    mixed_deficit: dict
    fitted_slope: float
    slope_ci: float
    intercept: float
    fit_window: tuple
    mixed_slopes: dict = field(default_factory=dict)
    ablation_deficits: dict = field(default_factory=dict)
    ablation_slopes: dict = field(default_factory=dict)
    no_log_oracle: np.ndarray | None = None
    mass_drift: float = 0.0
    leakage_max: float = 0.0

    def rows(self):
        names = sorted(self.ablation_deficits)
        labels = sorted(self.mixed_deficit)
        for k, t in enumerate(self.times):
            row = [t, self.l2_deficit[k]]
            row += [self.mixed_deficit[p][k] for p in labels]
            row += [self.ablation_deficits[n][k] for n in names]
            if self.no_log_oracle is not None:
                row.append(self.no_log_oracle[k])
            yield row

    def header(self):
        h = ["t", "l2_deficit"] + [f"mixed_{p}" for p in sorted(self.mixed_deficit)]
        h += [f"deficit_{n}" for n in sorted(self.ablation_deficits)]
        if self.no_log_oracle is not None:
            h.append("no_log_oracle")
        return h

    def to_csv(self):
        return csv_text(self.header(), self.rows())

    def summary(self):
        return {
            "fitted_slope": self.fitted_slope, "slope_ci": self.slope_ci,
            "fit_window": list(self.fit_window), "mixed_slopes": self.mixed_slopes,
            "ablation_slopes": self.ablation_slopes, "mass_drift": self.mass_drift,
            "leakage_max": self.leakage_max, "n_knots": int(len(self.times)),
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def plot(self, path):
        """Log-log deficit plot; needs matplotlib (optional)."""
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(self.times, self.l2_deficit, "o-", label="full")
        for n, v in sorted(self.ablation_deficits.items()):
            ax.loglog(self.times, v, ".--", label=n)
        ax.set_xlabel("t")
        ax.set_ylabel("L2 deficit")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def _window_fit(times, values, window, min_points):
    lo, hi = window
    m = (times >= lo * (1 - 1e-9)) & (times <= hi * (1 + 1e-9)) & (np.asarray(values) > 0)
    if np.count_nonzero(m) < min_points:
        return math.nan, math.nan, math.nan
    return fit_decay(times[m], np.asarray(values)[m], min_points)


def build_report(result, datum, window, pairs=DEFAULT_PAIRS, min_points=6):
    times = result.times
    full = result.deficits["full"]
    mixed, mixed_slopes = {}, {}
    for p in pairs:
        if p.q == np.inf and p.r == 2:
            continue
        series = tail_mixed_series(times, full.lr[p.r], p)
        mixed[p.label()] = series
        mixed_slopes[p.label()] = _window_fit(times, series, window, min_points)[0]
    slope, icpt, resid = _window_fit(times, full.l2, window, min_points)
    abl = {n: s.l2 for n, s in result.deficits.items() if n != "full"}
    abl_slopes = {n: _window_fit(times, v, window, min_points)[0] for n, v in abl.items()}
    oracle = np.array([no_log_deficit_oracle(datum, t) for t in times])
    m = result.mass_series
    drift = float(np.max(np.abs(m / m[-1] - 1.0))) if m.size and m[-1] > 0 else 0.0
    return DecayReport(times, full.l2, mixed, slope, resid, icpt, tuple(window), mixed_slopes,
                       abl, abl_slopes, oracle, drift, float(np.max(result.leakage_series)))


def ablation_study(ctx, T_end, cfg, t_out=2.0, window=(4.0, 32.0), per_decade=12,
                   pairs=DEFAULT_PAIRS, min_points=6, extra_times=()):
    """One backward-shooting run measured against the full profile and the
    no-log-phase and free-phase ablations."""
    knots = set(log_knots(t_out, T_end, per_decade).tolist())
    knots.update(float(t) for t in extra_times)
    compare = {"no_log": ctx.variant(log_phase=False), "free_phase": ctx.variant(phase_mode="free")}
    result = modified_wave_operator(ctx, T_end, t_out, cfg, record_times=sorted(knots),
                                    compare=compare, pairs=pairs)
    return build_report(result, ctx.datum, window, pairs, min_points), result


# ---------------------------------------------------------------- Strichartz

@dataclass(frozen=True)
class StrichartzConfig:
    grid: GridSpec
    T_window: float
    dt: float = 0.05
    n_times: int = 41
    seed: int = 0
    width_range: tuple = (1.5, 2.5)
    n_bumps: int = 3
    center_radius: float = 3.0


def random_ensemble(grid, size, seed=0, width_range=(1.5, 2.5), n_bumps=3, center_radius=3.0):
    """Unit-L2 sums of Gaussians with random centers, widths, momenta and phases."""
    rng = np.random.default_rng(seed)
    x, y, z = grid.coords
    out = []
    for _ in range(size):
        v = np.zeros(grid.shape, complex)
        for _ in range(n_bumps):
            c = rng.uniform(-center_radius, center_radius, 3)
            w = rng.uniform(*width_range)
            k = rng.normal(0.0, 0.3, 3)
            ph = rng.uniform(0, 2 * np.pi)
            r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
            v = v + np.exp(-r2 / (2 * w * w) + 1j * (k[0] * x + k[1] * y + k[2] * z + ph))
        f = ComplexField(grid, v)
        out.append(f * (1.0 / lebesgue_norm(f, 2)))
    return out


def strichartz_ratio(pair, ensemble_size, cfg, pairs_extra=()):
    """Truncated ``||e^{-itH} f||_{L^q([0,T_w]; L^r)} / ||f||_2`` over a random ensemble.

    Returns a dict with the per-sample ratios and their max and mean; extra
    pairs in ``pairs_extra`` reuse the same trajectories.
    """
    pairs = (pair,) + tuple(pairs_extra)
    if ensemble_size == 0:
        return {p.label(): {"ratios": [], "max": 0.0, "mean": 0.0} for p in pairs}
    data = random_ensemble(cfg.grid, ensemble_size, cfg.seed, cfg.width_range, cfg.n_bumps,
                           cfg.center_radius)
    return strichartz_ratios_for(data, pairs, cfg)


def strichartz_ratios_for(data, pairs, cfg):
    times = np.linspace(0.0, cfg.T_window, cfg.n_times)
    ecfg = EvolutionConfig(dt=cfg.dt, record_times=tuple(times), mass_tol=1e-6, leakage_tol=1.0)
    per = {p.label(): [] for p in pairs}
    for f in data:
        norm0 = lebesgue_norm(f, 2)
        vals = {p.r: [] for p in pairs}

        def rec(t, u, vals=vals):
            for r in vals:
                vals[r].append(lebesgue_norm(u, r))

        if norm0 == 0:
            for p in pairs:
                per[p.label()].append(0.0)
            continue
        linear_trajectory(f, 0.0, cfg.T_window, ecfg, keep_states=False, on_record=rec)
        for p in pairs:
            ts = TimeSeriesNorm(times, vals[p.r], p)
            per[p.label()].append(mixed_norm(ts, 0.0) / norm0)
    return {k: {"ratios": v, "max": float(max(v)), "mean": float(np.mean(v))} for k, v in per.items()}


# ------------------------------------------------------------ inequalities

def _safe_ratio(a, b):
    return 0.0 if b == 0 else a / b


def audit_sample(f):
    """Both sides of the embedding chain and the two nonlinear H1 bounds."""
    grid = f.grid
    V = inverse_laplacian(RealField(grid, np.abs(f.values) ** 2)).values
    l2, l4 = lebesgue_norm(f, 2), lebesgue_norm(f, 4)
    h1 = sobolev_norm(f, 1.0)
    inter = l2 + l4
    g = ComplexField(grid, np.exp(-1j * V) * f.values)
    hg = sobolev_norm(g, 1.0)
    hvg = sobolev_norm(ComplexField(grid, V * g.values), 1.0)
    return {
        "potential_vs_l2l4": _safe_ratio(float(np.max(np.abs(V))), inter**2),
        "l2l4_vs_h1": _safe_ratio(inter**2, h1**2),
        "phase_h1": _safe_ratio(hg, h1 * (1 + h1**2)),
        "potential_phase_h1": _safe_ratio(hvg, h1 * (1 + h1**2 + h1**4)),
    }


def default_audit_samples(grid, size=50, seed=0):
    """Random localized fields across three decades of amplitude."""
    rng = np.random.default_rng(seed)
    base = random_ensemble(grid, size, seed, width_range=(0.8, 2.0), n_bumps=2,
                           center_radius=0.2 * grid.extent)
    amps = 10.0 ** rng.uniform(-1.5, 1.0, size)
    return [f * a for f, a in zip(base, amps)]


def inequality_audit(samples):
    """Per-inequality max empirical constants over ``samples``."""
    rows = [audit_sample(f) for f in samples]
    if not rows:
        return {"max": {}, "samples": []}
    keys = rows[0].keys()
    return {"max": {k: max(r[k] for r in rows) for k in keys}, "samples": rows}
