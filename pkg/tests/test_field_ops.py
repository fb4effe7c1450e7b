import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hartree_mwo.errors import ContractViolation, DomainError
from hartree_mwo.field_ops import (DILATION_PHASE, AdmissiblePair, TimeSeriesNorm, dilate,
                                   lebesgue_norm, log_trapezoid_weights, mixed_norm,
                                   modulate_phase, modulate_quadratic, sobolev_norm,
                                   trapezoid_weights)
from hartree_mwo.grid import ComplexField, GridSpec, RealField, forward_transform

from conftest import gaussian

G = GridSpec(48, 10.0)
UNIT = ComplexField(G, gaussian(G))


def test_admissible_pairs():
    assert AdmissiblePair(4, 3).label() == "(4,3)"
    assert AdmissiblePair(np.inf, 2).label() == "(inf,2)"
    AdmissiblePair(2, 6)
    with pytest.raises(DomainError):
        AdmissiblePair(4, 4)
    with pytest.raises(DomainError):
        AdmissiblePair(1, 2)


def test_dilation_at_one_is_a_phase():
    out = dilate(UNIT, 1.0)
    assert np.max(np.abs(out.values - DILATION_PHASE * UNIT.values)) < 1e-12
    assert np.isclose(DILATION_PHASE, np.exp(-0.75j * np.pi))


def test_dilation_preserves_l2_and_scales_l3():
    big = GridSpec(48, 20.0)
    f = ComplexField(G, gaussian(G, 1.0))
    g = dilate(f, 2.0, out_grid=big)
    assert abs(lebesgue_norm(g, 2) - lebesgue_norm(f, 2)) < 1e-8 * lebesgue_norm(f, 2)
    # L3 norm of exp(-|x|^2/2): (2 pi / 3)^{1/2}, so the rescaled one is 2^{-1/2} times it
    l3 = integrate.quad(lambda r: 4 * np.pi * r * r * np.exp(-1.5 * r * r), 0, np.inf)[0] ** (1 / 3)
    assert abs(lebesgue_norm(f, 3) - l3) < 1e-6 * l3
    assert abs(lebesgue_norm(g, 3) - 2**-0.5 * l3) < 1e-6 * l3


def test_dilation_rejects_bad_time():
    with pytest.raises(DomainError):
        dilate(UNIT, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 100.0), st.sampled_from([2, 4]))
def test_quadratic_modulation_is_an_isometry(t, p):
    out = modulate_quadratic(UNIT, t)
    assert abs(lebesgue_norm(out, p) - lebesgue_norm(UNIT, p)) < 1e-12 * lebesgue_norm(UNIT, p)
    back = modulate_quadratic(out, -t)
    assert np.max(np.abs(back.values - UNIT.values)) < 1e-12


def test_quadratic_modulation_limit():
    out = modulate_quadratic(UNIT, 1e6)
    assert lebesgue_norm(out - UNIT, 2) <= 1e-4
    with pytest.raises(DomainError):
        modulate_quadratic(UNIT, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_phase_modulation_isometry(seed):
    rng = np.random.default_rng(seed)
    psi = RealField(G, rng.normal(size=G.shape) * 10)
    out = modulate_phase(UNIT, psi)
    assert abs(lebesgue_norm(out, 2) - lebesgue_norm(UNIT, 2)) < 1e-12 * lebesgue_norm(UNIT, 2)


def test_phase_modulation_special_cases():
    zero = RealField(G, np.zeros(G.shape))
    assert np.array_equal(modulate_phase(UNIT, zero).values, UNIT.values)
    t = 3.0
    quad = RealField(G, G.radius**2 / (2 * t))
    a = modulate_phase(UNIT, quad).values
    b = modulate_quadratic(UNIT, t).values
    assert np.max(np.abs(a - b)) < 1e-12
    with pytest.raises(ContractViolation):
        modulate_phase(UNIT, RealField(GridSpec(16, 1.0), np.zeros((16,) * 3)))


def test_lebesgue_norm_examples():
    assert lebesgue_norm(ComplexField(G, np.zeros(G.shape)), 2) == 0.0
    bump = gaussian(G, 0.7) * 3.0
    assert lebesgue_norm(ComplexField(G, bump), np.inf) == np.max(bump)
    # \int exp(-|x|^2) dx = pi^{3/2}
    assert abs(lebesgue_norm(UNIT, 2) - np.pi**0.75) < 1e-8
    with pytest.raises(DomainError):
        lebesgue_norm(UNIT, 0.5)


def test_sobolev_norm_examples():
    assert abs(sobolev_norm(UNIT, 0) - lebesgue_norm(UNIT, 2)) < 1e-12 * lebesgue_norm(UNIT, 2)
    # frequency quadrature: f_hat = exp(-|xi|^2/2), \int (1+k^2) exp(-k^2) d^3k
    ref = integrate.quad(lambda k: 4 * np.pi * k * k * (1 + k * k) * np.exp(-k * k), 0, np.inf)[0]
    assert abs(sobolev_norm(UNIT, 1) - np.sqrt(ref)) < 1e-8
    assert sobolev_norm(forward_transform(UNIT), 1) == pytest.approx(sobolev_norm(UNIT, 1), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_h1_dominates_l2(seed):
    rng = np.random.default_rng(seed)
    f = ComplexField(GridSpec(16, 4.0), rng.normal(size=(16,) * 3))
    assert sobolev_norm(f, 1) >= lebesgue_norm(f, 2)


def test_quadrature_weights():
    t = np.geomspace(1, 100, 25)
    assert np.isclose(trapezoid_weights(t).sum(), 99.0)
    assert np.isclose(log_trapezoid_weights(t) @ (1 / t), np.log(100), rtol=1e-3)


def test_mixed_norm_examples():
    t = np.linspace(1, 2, 11)
    c = 0.7
    s = TimeSeriesNorm(t, np.full_like(t, c), AdmissiblePair(2, 6))
    # over a unit interval the L^q norm of a constant is the constant
    assert abs(mixed_norm(s, 1.0) - c) < 1e-12
    t = np.geomspace(1, 100, 400)
    s = TimeSeriesNorm(t, 1 / t, AdmissiblePair(2, 6))
    assert abs(mixed_norm(s, 1.0) - (1 - 1e-2) ** 0.5) < 1e-3
    v = np.abs(np.sin(t))
    s = TimeSeriesNorm(t, v, AdmissiblePair(np.inf, 2))
    assert mixed_norm(s, 1.0) == v.max()


def test_mixed_norm_interpolated_start():
    t = np.geomspace(1, 64, 40)
    s = TimeSeriesNorm(t, t**-1.0, AdmissiblePair(2, 6))
    assert abs(mixed_norm(s, 5.0) - (1 / 5 - 1 / 64) ** 0.5) < 2e-3
    with pytest.raises(DomainError):
        mixed_norm(s, 0.5)


def test_time_series_validation():
    with pytest.raises(ContractViolation):
        TimeSeriesNorm([2, 1], [1, 1], AdmissiblePair(4, 3))
    with pytest.raises(ContractViolation):
        TimeSeriesNorm([1, 2], [1, -1], AdmissiblePair(4, 3))
