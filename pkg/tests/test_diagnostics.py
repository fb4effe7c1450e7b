import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hartree_mwo.diagnostics import (StrichartzConfig, default_audit_samples, fit_decay,
                                     inequality_audit, log_knots, strichartz_ratio,
                                     strichartz_ratios_for, tail_mixed_series)
from hartree_mwo.errors import DomainError
from hartree_mwo.field_ops import AdmissiblePair
from hartree_mwo.grid import ComplexField, GridSpec

from conftest import gaussian

INF2, P43, P26 = AdmissiblePair(np.inf, 2), AdmissiblePair(4, 3), AdmissiblePair(2, 6)


def test_fit_exact_power_law():
    t = np.geomspace(1, 100, 12)
    slope, icpt, resid = fit_decay(t, t**-0.5)
    assert abs(slope + 0.5) <= 1e-10
    assert abs(icpt) <= 1e-10 and resid <= 1e-10


def test_fit_constant():
    t = np.geomspace(1, 100, 12)
    assert abs(fit_decay(t, np.full_like(t, 2.5))[0]) <= 1e-12


def test_fit_perturbed_power_law():
    t = np.geomspace(1, 100, 25)
    slope, _, _ = fit_decay(t, 3 * t**-0.3 * (1 + 0.01 * np.sin(np.log(t))))
    assert -0.31 <= slope <= -0.29


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_fit_recovers_any_power(a, c):
    t = np.geomspace(2, 64, 8)
    assert abs(fit_decay(t, c * t**a)[0] - a) <= 1e-10


def test_fit_errors():
    t = np.geomspace(1, 100, 6)
    with pytest.raises(DomainError):
        fit_decay(t, np.r_[1.0, 1.0, 0.0, 1.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        fit_decay(t[:5], t[:5])


def test_log_knots_density():
    k = log_knots(2.0, 200.0, 12)
    assert k.size == 25 and k[0] == 2.0 and math.isclose(k[-1], 200.0)


def test_tail_mixed_series_ends_at_zero():
    t = np.geomspace(1, 10, 9)
    s = tail_mixed_series(t, 1 / t, P43)
    assert s[-1] == 0.0 and np.all(np.diff(s) < 0)


def test_report_serialization(default_study):
    rep = default_study["report"]
    text = rep.to_csv()
    head = text.splitlines()[0].split(",")
    assert head[0] == "t" and "l2_deficit" in head
    assert len(text.splitlines()) == rep.times.size + 1
    summary = json.loads(rep.to_json())
    assert summary["fitted_slope"] == pytest.approx(rep.fitted_slope)


def test_ablation_terminal_condition(default_study):
    rep = default_study["report"]
    assert rep.l2_deficit[-1] == 0.0
    assert rep.times[-1] == default_study["T_end"]


# ---------------------------------------------------------------- Strichartz

def test_strichartz_mass_pair_is_exactly_one():
    cfg = StrichartzConfig(GridSpec(32, 12.0), 2.0, dt=0.1, n_times=11)
    out = strichartz_ratio(INF2, 3, cfg)["(inf,2)"]
    assert all(abs(r - 1) <= 1e-12 for r in out["ratios"])


def test_strichartz_zero_datum():
    cfg = StrichartzConfig(GridSpec(32, 12.0), 2.0, dt=0.1, n_times=11)
    z = ComplexField(cfg.grid, np.zeros(cfg.grid.shape))
    out = strichartz_ratios_for([z], (P43, P26), cfg)
    assert out["(4,3)"]["max"] == 0.0 and out["(2,6)"]["max"] == 0.0
    assert strichartz_ratio(P43, 0, cfg)["(4,3)"]["max"] == 0.0


def _strichartz_max(n, T_w, n_times):
    cfg = StrichartzConfig(GridSpec(n, 40.0), T_w, dt=0.1, n_times=n_times)
    out = strichartz_ratio(P43, 3, cfg, (P26,))
    return out["(4,3)"]["max"], out["(2,6)"]["max"]


@pytest.mark.slow
def test_strichartz_window_and_grid_stability():
    base = _strichartz_max(64, 6.75, 28)
    longer = _strichartz_max(64, 13.5, 55)
    finer = _strichartz_max(96, 6.75, 28)
    for a, b, c in zip(base, longer, finer):
        assert abs(b / a - 1) <= 0.10
        assert abs(c / a - 1) <= 0.10


# ------------------------------------------------------------ inequalities

def test_audit_zero_sample():
    g = GridSpec(32, 8.0)
    row = inequality_audit([ComplexField(g, np.zeros(g.shape))])["max"]
    assert all(v == 0.0 for v in row.values())
    assert inequality_audit([]) == {"max": {}, "samples": []}


def test_audit_dilation_family():
    g = GridSpec(64, 8.0)
    lams = [0.6, 0.8, 1.0, 1.25, 1.6]
    rows = []
    for lam in lams:
        f = ComplexField(g, lam**1.5 * gaussian(g, 1 / lam))
        rows.append(inequality_audit([f])["samples"][0])
        # the L2 side is dilation invariant
        assert abs(math.sqrt(g.integrate(np.abs(f.values) ** 2)) - math.pi**0.75) <= 1e-8
    for key in rows[0]:
        v = np.array([r[key] for r in rows])
        assert np.all(np.isfinite(v)) and np.all(v > 0)
        # neighbouring members differ by a bounded factor
        assert np.max(np.abs(np.diff(np.log(v)))) <= 1.0


def test_audit_phase_and_translation_invariance():
    g = GridSpec(48, 12.0)
    f = default_audit_samples(g, 3, seed=2)
    base = inequality_audit(f)["samples"]
    rot = inequality_audit([u * np.exp(0.9j) for u in f])["samples"]
    moved = inequality_audit([ComplexField(g, np.roll(u.values, (3, -2, 1), axis=(0, 1, 2)))
                              for u in f])["samples"]
    for a, b, c in zip(base, rot, moved):
        for k in a:
            assert abs(b[k] - a[k]) <= 1e-8 * a[k]
            assert abs(c[k] - a[k]) <= 1e-8 * a[k]


@pytest.mark.slow
def test_audit_grid_stability():
    coarse = inequality_audit(default_audit_samples(GridSpec(48, 12.0)))["max"]
    fine = inequality_audit(default_audit_samples(GridSpec(64, 12.0)))["max"]
    for k in coarse:
        assert math.isfinite(coarse[k])
        assert abs(fine[k] / coarse[k] - 1) <= 0.05
