import math

import numpy as np
import pytest
from scipy import special

from hartree_mwo import profile as pf
from hartree_mwo.diagnostics import fit_decay
from hartree_mwo.errors import ContractViolation, DomainError
from hartree_mwo.field_ops import lebesgue_norm, sobolev_norm
from hartree_mwo.grid import ComplexField, GridSpec

from conftest import context_on, gaussian


def test_nonlinearity_basic():
    g = GridSpec(48, 10.0)
    zero = ComplexField(g, np.zeros(g.shape))
    assert np.all(pf.hartree_nonlinearity(zero).values == 0)
    u = ComplexField(g, gaussian(g) * (1 + 0.5j))
    a = pf.hartree_nonlinearity(u * np.exp(0.7j)).values
    b = np.exp(0.7j) * pf.hartree_nonlinearity(u).values
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(np.abs(b))


def test_nonlinearity_on_gaussian():
    g = GridSpec(64, 8.0)
    u = ComplexField(g, gaussian(g))
    F = pf.hartree_nonlinearity(u).values
    r = g.radius
    V = np.where(r > 0, np.pi**1.5 * special.erf(np.where(r > 0, r, 1)) / np.where(r > 0, r, 1),
                 2 * np.pi)
    ref = V * u.values
    mask = r <= 0.5 * g.extent
    assert np.max(np.abs(F - ref)[mask]) / np.max(np.abs(ref[mask])) <= 1e-4


def test_datum_support_and_smallness_contracts():
    g = GridSpec(32, 1.0)
    with pytest.raises(ContractViolation):
        pf.ScatteringDatum.from_samples(ComplexField(g, gaussian(g, 0.2)), 0.1)
    d = pf.ScatteringDatum.from_samples(ComplexField(g, 1e-3 * gaussian(g, 0.2)), 0.1,
                                        allow_origin_support=True)
    assert d.origin_support
    with pytest.raises(ContractViolation):
        pf.annulus_datum(g, 0.1, 0.5, 0.1, potential_sup=0.05, amplitude=100.0)
    with pytest.raises(DomainError):
        pf.ScatteringDatum.from_samples(ComplexField(g, np.zeros(g.shape)), 0.0)


def test_annulus_normalization(identity_setup):
    d = identity_setup.datum
    assert abs(d.potential_sup - 0.05) < 1e-12
    inner = d.grid.radius < d.c0
    assert np.all(d.uhat_plus.values[inner] == 0)
    assert d.h1_norm == pytest.approx(sobolev_norm(d.uhat_plus, 1))


def test_potential_at_matches_cached_samples(identity_setup):
    d = identity_setup.datum
    out = d.potential_at(d.grid, 1.0)
    assert np.max(np.abs(out - d.static_potential.values)) < 1e-12 * d.potential_sup


def test_amplitude_at_time_one_is_the_datum(identity_setup):
    W = pf.build_W(identity_setup, 1.0)
    assert np.array_equal(W.values, identity_setup.datum.uhat_plus.values)
    with pytest.raises(DomainError):
        pf.build_W(identity_setup, 0.5)


@pytest.mark.parametrize("t", [2.0, 10.0, 100.0])
def test_amplitude_modulus(identity_setup, t):
    u = np.abs(identity_setup.datum.uhat_plus.values)
    W = np.abs(pf.build_W(identity_setup, t).values)
    assert np.max(np.abs(W - u)) <= 1e-12 * np.max(u)


def test_amplitude_time_derivative(identity_setup):
    ctx = identity_setup
    d = ctx.datum
    h = 1e-3
    fd = (pf.build_W(ctx, 10 + h).values - pf.build_W(ctx, 10 - h).values) / (2 * h)
    ref = -1j / 10 * d.static_potential.values * pf.build_W(ctx, 10).values
    err = math.sqrt(d.grid.integrate(np.abs(fd - ref) ** 2) / d.grid.integrate(np.abs(ref) ** 2))
    assert err <= 1e-6


# each time gets a box holding the dilated support
PROFILE_GRIDS = {4.0: GridSpec(64, 16.0), 16.0: GridSpec(64, 32.0), 64.0: GridSpec(96, 128.0)}


@pytest.fixture(scope="module")
def per_time_contexts(identity_setup):
    d = identity_setup.datum
    return {t: context_on(d, g, [2.0, t]) for t, g in PROFILE_GRIDS.items()}


@pytest.mark.parametrize("t", sorted(PROFILE_GRIDS))
def test_profile_two_formulations_agree(per_time_contexts, t):
    ctx = per_time_contexts[t]
    a = pf.build_profile(ctx, t).values
    b = pf.build_profile_direct(ctx, t).values
    assert pf._rel_l2(a, b, ctx.grid) <= 1e-10


@pytest.mark.parametrize("t", [16.0, 64.0])
def test_profile_norms(per_time_contexts, t):
    ctx = per_time_contexts[t]
    d = ctx.datum
    up = pf.build_profile(ctx, t)
    assert abs(lebesgue_norm(up, 2) / d.l2_norm - 1) <= 1e-6
    # direct evaluation of the closed-form annulus at the sample points x/t
    g = ctx.grid
    amp = np.max(np.abs(d.uhat_plus.values)) / np.max(np.abs(pf.annulus_profile(d.grid, 0.95, 0.14, d.c0)))
    r = g.radius / t
    oracle = amp * np.where(r >= d.c0, np.exp(-((r - 0.95) ** 2) / 0.14**2), 0.0)
    assert abs(np.max(np.abs(up.values)) / (t**-1.5 * np.max(oracle)) - 1) <= 1e-6


def test_profile_rejects_uncovered_time(identity_setup):
    with pytest.raises(DomainError):
        pf.build_profile(identity_setup, 5.0)


def test_factorization_identity(identity_setup):
    assert pf.profile_nonlinearity_identity(identity_setup, 8.0) <= 1e-6


def test_factorization_identity_zero_datum(identity_setup):
    z = pf.zero_datum(identity_setup.datum.grid, identity_setup.datum.c0)
    assert pf.profile_nonlinearity_identity(identity_setup.variant(datum=z), 8.0) == 0.0


def test_factorization_identity_phase_blind(identity_setup):
    d = identity_setup.datum
    rot = pf.ScatteringDatum.from_samples(d.uhat_plus * np.exp(1.1j), d.c0)
    a = pf.profile_nonlinearity_identity(identity_setup, 8.0)
    b = pf.profile_nonlinearity_identity(identity_setup.variant(datum=rot), 8.0)
    assert abs(a - b) <= 1e-12


def test_potential_scaling_identity(identity_setup):
    assert pf.potential_scaling_identity(identity_setup, 10.0) <= 1e-6


def test_three_piece_decomposition_sums(identity_setup):
    ctx = identity_setup
    f = ctx.datum.uhat_plus
    t = 10.0
    parts = [pf.decompose_U(ctx, t, j, f, enforce_regime=False).values for j in (1, 2, 3)]
    from hartree_mwo.field_ops import dilate

    ref = pf._phase_factor(ctx, t, ctx.grid) * dilate(f, t, out_grid=ctx.grid).values
    assert pf._rel_l2(sum(parts), ref, ctx.grid) <= 1e-10


def test_cutoff_piece_vanishes_on_supported_data(identity_setup):
    ctx = identity_setup.variant(phase_mode="free", T1=2.0)
    f = ctx.datum.uhat_plus
    out = pf.decompose_U(ctx, 8.0, 2, f, modulation=False)
    assert np.max(np.abs(out.values)) <= 1e-12 * np.max(np.abs(f.values))
    with pytest.raises(DomainError):
        pf.decompose_U(ctx, 3.0, 2, f)
    with pytest.raises(DomainError):
        pf.decompose_U(ctx, 8.0, 4, f)


def test_first_piece_decays(identity_setup):
    d = identity_setup.datum
    f = d.uhat_plus * (1.0 / sobolev_norm(d.uhat_plus, 1))
    times = [8.0, 16.0, 32.0, 64.0]
    vals = []
    for t in times:
        g = GridSpec(64, max(16.0, 2.8 * t))
        ctx = context_on(d, g, [2.0, t])
        vals.append(lebesgue_norm(pf.decompose_U(ctx, t, 1, f), 2))
    slope, _, _ = fit_decay(times, vals, min_points=4)
    assert slope <= -0.3


def test_no_log_oracle(identity_setup):
    d = identity_setup.datum
    assert pf.no_log_deficit_oracle(d, 1.0) == 0.0
    # small-phase regime: ||(e^{-iV log t} - 1) u|| ~ log t ||V u||
    t = 1.01
    lin = math.log(t) * math.sqrt(d.grid.integrate(np.abs(d.static_potential.values * d.uhat_plus.values) ** 2))
    assert pf.no_log_deficit_oracle(d, t) == pytest.approx(lin, rel=1e-3)


def test_context_validation(identity_setup):
    with pytest.raises(DomainError):
        identity_setup.variant(b=0.5)
    with pytest.raises(DomainError):
        identity_setup.variant(phase_mode="other")
    with pytest.raises(ContractViolation):
        pf.ProfileContext(identity_setup.datum, None, identity_setup.grid)
