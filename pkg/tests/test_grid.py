import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from hartree_mwo.errors import ContractViolation, DomainError
from hartree_mwo.grid import (FREQUENCY, ComplexField, GridSpec, Multiplier, RadialGrid,
                              RealField, apply_multiplier, forward_transform, inverse_laplacian,
                              inverse_transform, leakage_fraction)

from conftest import gaussian


def erf_oracle(r):
    """Radial quadrature of ``\\int exp(-|y|^2)/|x-y| dy`` (shell theorem)."""
    out = []
    for x in np.atleast_1d(r):
        inner = integrate.quad(lambda s: 4 * np.pi * s * s * np.exp(-s * s), 0, x)[0]
        outer = integrate.quad(lambda s: 4 * np.pi * s * np.exp(-s * s), x, np.inf)[0]
        out.append(inner / x + outer if x > 0 else outer)
    return np.array(out)


def test_grid_validation():
    with pytest.raises(DomainError):
        GridSpec(31, 8.0)
    with pytest.raises(DomainError):
        GridSpec(32, -1.0)
    with pytest.raises(DomainError):
        RadialGrid(2, 1.0)


def test_axis_starts_at_minus_L():
    g = GridSpec(16, 4.0)
    assert g.axis[0] == -4.0
    assert np.isclose(g.axis[-1], 4.0 - g.spacing)
    assert g.shape == (16, 16, 16)


def test_constant_field_is_a_zero_mode_delta(small_grid):
    g = small_grid
    one = ComplexField(g, np.ones(g.shape))
    fh = forward_transform(one).values
    assert np.max(np.abs(fh.ravel()[1:])) < 1e-12 * abs(fh.flat[0])
    norm1 = np.sqrt(g.integrate(np.ones(g.shape)))
    assert abs(abs(fh.flat[0]) * np.sqrt(g.freq_cell_volume) - norm1) < 1e-12 * norm1


def test_gaussian_transform_pointwise():
    g = GridSpec(48, 12.0)
    fh = forward_transform(ComplexField(g, gaussian(g))).values
    # pointwise check against direct 1D quadrature of one axis, times the other two
    k = g.wavenumbers
    idx = [0, 1, 3, 7, 12]
    oneD = []
    for j in idx:
        re = integrate.quad(lambda x: np.exp(-x * x / 2) * np.cos(k[j] * x), -np.inf, np.inf)[0]
        oneD.append(re / np.sqrt(2 * np.pi))
    oneD = np.array(oneD)
    for a, ja in enumerate(idx):
        for b, jb in enumerate(idx):
            assert abs(fh[ja, jb, 0] - oneD[a] * oneD[b] * oneD[0]) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_plancherel_random(seed):
    g = GridSpec(16, 3.0)
    rng = np.random.default_rng(seed)
    f = ComplexField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    fh = forward_transform(f)
    n0 = np.sqrt(g.integrate(np.abs(f.values) ** 2))
    n1 = np.sqrt(g.integrate_freq(np.abs(fh.values) ** 2))
    assert abs(n0 - n1) < 1e-12 * n0
    back = inverse_transform(fh)
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))


def test_space_tags_enforced(small_grid):
    f = ComplexField(small_grid, np.zeros(small_grid.shape))
    with pytest.raises(ContractViolation):
        inverse_transform(f)
    with pytest.raises(ContractViolation):
        forward_transform(forward_transform(f))
    with pytest.raises(ContractViolation):
        ComplexField(small_grid, np.zeros((4, 4, 4)))
    with pytest.raises(ContractViolation):
        ComplexField(small_grid, np.full(small_grid.shape, np.nan))


def test_inverse_laplacian_zero(small_grid):
    out = inverse_laplacian(RealField(small_grid, np.zeros(small_grid.shape)))
    assert np.all(out.values == 0)


def test_inverse_laplacian_rejects_negative_density(small_grid):
    with pytest.raises(ContractViolation):
        inverse_laplacian(RealField(small_grid, -np.ones(small_grid.shape)))


def test_erf_oracle_cross_check():
    r = np.array([0.0, 0.3, 1.0, 2.5, 6.0])
    closed = np.where(r > 0, np.pi**1.5 * special.erf(r) / np.where(r > 0, r, 1), 2 * np.pi)
    assert np.max(np.abs(erf_oracle(r) - closed) / closed) < 1e-10


def test_coulomb_kernel_pin_cube():
    g = GridSpec(64, 8.0)
    rho = RealField(g, gaussian(g, width=1 / np.sqrt(2)))
    V = inverse_laplacian(rho).values
    mask = g.radius <= 0.5 * g.extent
    r = g.radius[mask]
    ref = np.pi**1.5 * special.erf(np.where(r > 0, r, 1)) / np.where(r > 0, r, 1)
    ref = np.where(r > 0, ref, 2 * np.pi)
    assert np.max(np.abs(V[mask] - ref) / ref) <= 1e-4


def test_coulomb_kernel_pin_radial():
    g = RadialGrid(800, 20.0)
    rho = RealField(g, np.exp(-g.radius**2))
    V = inverse_laplacian(rho).values
    m = g.radius <= 10
    ref = np.pi**1.5 * special.erf(g.radius[m]) / g.radius[m]
    assert np.max(np.abs(V[m] - ref) / ref) <= 1e-4


def test_hartree_potential_scaling_law():
    g = GridSpec(64, 12.0)
    t = 1.5
    rho_t = t**-3 * np.exp(-(g.radius / t) ** 2)
    lhs = inverse_laplacian(RealField(g, rho_t)).values
    r = g.radius / t
    ref = np.where(r > 0, np.pi**1.5 * special.erf(r) / np.where(r > 0, r, 1), 2 * np.pi) / t
    mask = g.radius <= 0.5 * g.extent
    assert np.max(np.abs(lhs - ref)[mask]) / np.max(ref[mask]) <= 1e-6


def test_periodic_solve_differs_from_free():
    g = GridSpec(32, 6.0)
    rho = RealField(g, gaussian(g))
    free = inverse_laplacian(rho).values
    per = inverse_laplacian(rho, method="periodic").values
    assert np.max(np.abs(free - per)) > 1e-2
    with pytest.raises(ContractViolation):
        inverse_laplacian(rho, method="spectral")


def test_multiplier_identity_and_laplacian():
    g = GridSpec(48, 10.0)
    f = ComplexField(g, gaussian(g))
    same = apply_multiplier(f, Multiplier(g, lambda k2: np.ones_like(k2)))
    assert np.max(np.abs(same.values - f.values)) < 1e-12
    lap = apply_multiplier(f, Multiplier(g, lambda k2: k2))
    r2 = g.radius**2
    ref = (3 - r2) * np.exp(-r2 / 2)
    assert np.max(np.abs(lap.values - ref)) < 1e-6
    free0 = apply_multiplier(f, Multiplier(g, lambda k2: np.exp(-0.5j * 0.0 * k2)))
    assert np.max(np.abs(free0.values - f.values)) < 1e-12


def test_multiplier_in_frequency_space(small_grid):
    f = forward_transform(ComplexField(small_grid, gaussian(small_grid)))
    out = apply_multiplier(f, Multiplier(small_grid, 2.0))
    assert out.space == FREQUENCY
    assert np.allclose(out.values, 2 * f.values)


def test_multiplier_rejects_nonfinite_symbol(small_grid):
    with pytest.raises(DomainError), np.errstate(divide="ignore"):
        Multiplier(small_grid, lambda k2: 1.0 / k2)


def test_radial_plancherel_and_roundtrip():
    g = RadialGrid(400, 30.0)
    f = ComplexField(g, np.exp(-g.radius**2 / 2) * (1 + 0.3j * g.radius))
    fh = forward_transform(f)
    n0 = np.sqrt(g.integrate(np.abs(f.values) ** 2))
    n1 = np.sqrt(g.integrate_freq(np.abs(fh.values) ** 2))
    assert abs(n0 - n1) < 1e-12 * n0
    assert np.max(np.abs(inverse_transform(fh).values - f.values)) < 1e-12


def test_radial_gaussian_transform():
    g = RadialGrid(400, 30.0)
    fh = forward_transform(ComplexField(g, np.exp(-g.radius**2 / 2))).values
    assert np.max(np.abs(fh - np.exp(-g.k2 / 2))) < 1e-10


def test_leakage_fraction(small_grid):
    g = small_grid
    assert leakage_fraction(g, gaussian(g, 0.5)) < 1e-12
    assert leakage_fraction(g, np.zeros(g.shape)) == 0.0
    assert leakage_fraction(g, np.ones(g.shape)) > 0.5


def test_resample_identity_and_scaling():
    g = GridSpec(32, 6.0)
    f = gaussian(g)
    assert np.max(np.abs(g.resample(f, g, 1.0) - f)) < 1e-12
    big = GridSpec(32, 12.0)
    out = g.resample(f, big, 2.0)
    ref = np.exp(-big.radius**2 / 8)
    inside = big.radius <= 10
    assert np.max(np.abs(out - ref)[inside]) < 1e-8
