import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ballsquare.errors import FrequencyOverflowError, GridError, MultiplierError
from ballsquare.grid_spectral import (
    Field, SpectralField, apply_radial_multiplier, fractional_laplacian, inverse_transform,
    laplacian, lp_norm, make_grid, riesz_potential, sample_bump_j, sample_gaussian,
    sample_plane_wave, transform, unit_ball_volume,
)
from ballsquare.kernels import RadialSymbol, build_window_pair


def random_field(grid, seed, complex_=False):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.shape)
    if complex_:
        v = v + 1j * rng.standard_normal(grid.shape)
    return Field(grid, v)


grids = st.sampled_from([(1, 64, 4.0), (1, 256, 10.0), (2, 32, 3.0), (3, 8, 2.0)])


def test_grid_geometry():
    g = make_grid(1, 8, 4.0)
    assert g.spacing == 1.0
    assert np.allclose(g.axis, np.arange(-4.0, 4.0))
    assert g.frequency_step == pytest.approx(math.pi / 4)
    assert g.nyquist == pytest.approx(math.pi)
    g3 = make_grid(3, 8, 2.0)
    assert g3.shape == (8, 8, 8)
    assert g3.cell_volume == pytest.approx(0.125)
    assert g3.max_radius == pytest.approx(math.sqrt(3) * g3.nyquist)


@pytest.mark.parametrize("args", [(4, 8, 1.0), (1, 12, 1.0), (1, 4, 1.0), (1, 8, 0.0),
                                  (2, 8, -1.0)])
def test_grid_rejects_bad_parameters(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_field_shape_checked():
    g = make_grid(2, 8, 1.0)
    with pytest.raises(GridError):
        Field(g, np.zeros(10))
    with pytest.raises(GridError):
        Field(g, np.zeros((8, 8))) + Field(make_grid(2, 8, 2.0), np.zeros((8, 8)))


def test_field_is_immutable_copy():
    g = make_grid(1, 8, 1.0)
    raw = np.zeros(8)
    f = Field(g, raw)
    raw[0] = 5.0
    assert f.values[0] == 0.0
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_transform_of_constant():
    g = make_grid(1, 64, 8.0)
    F = transform(Field(g, np.ones(64)))
    assert F.at_frequency(0) == pytest.approx(16.0)
    assert np.max(np.abs(F.coeffs[1:])) < 1e-12


@pytest.mark.parametrize("n, N, L", [(1, 256, 16.0), (2, 128, 12.0), (3, 64, 10.0)])
def test_transform_of_gaussian(n, N, L):
    # exp(-|x|^2/2) has transform (2 pi)^(n/2) exp(-|xi|^2/2)
    g = make_grid(n, N, L)
    F = transform(sample_gaussian(g))
    exact = (2 * math.pi) ** (n / 2) * np.exp(-g.radius ** 2 / 2)
    assert np.max(np.abs(F.coeffs - exact)) < 1e-10


def test_plane_wave_transform_is_a_spike():
    g = make_grid(1, 32, 4.0)
    F = transform(sample_plane_wave(g, 3))
    assert abs(F.at_frequency(3)) == pytest.approx(8.0)
    mask = np.ones(32, bool)
    mask[3] = False
    assert np.max(np.abs(F.coeffs[mask])) < 1e-12


@given(grids, st.integers(0, 10 ** 6), st.booleans())
@settings(max_examples=30, deadline=None)
def test_round_trip(grid_args, seed, cplx):
    g = make_grid(*grid_args)
    f = random_field(g, seed, cplx)
    back = inverse_transform(transform(f))
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values)) * 10


@given(grids, st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_plancherel(grid_args, seed):
    g = make_grid(*grid_args)
    f = random_field(g, seed, True)
    F = transform(f)
    lhs = np.sum(np.abs(f.values) ** 2) * g.cell_volume
    rhs = np.sum(np.abs(F.coeffs) ** 2) * g.frequency_step ** g.dim / (2 * math.pi) ** g.dim
    assert rhs == pytest.approx(lhs, rel=1e-10)


@given(grids, st.integers(0, 10 ** 6))
@settings(max_examples=20, deadline=None)
def test_real_input_stays_real(grid_args, seed):
    g = make_grid(*grid_args)
    f = random_field(g, seed)
    back = inverse_transform(transform(f))
    assert back.is_real(1e-12)
    assert np.allclose(inverse_transform(transform(f), real=True).values, f.values)


def test_identity_multiplier():
    g = make_grid(2, 16, 2.0)
    F = transform(random_field(g, 1))
    G = apply_radial_multiplier(F, lambda r: np.ones_like(r))
    assert np.array_equal(G.coeffs, F.coeffs)


def test_multiplier_on_plane_wave_is_eigenvalue():
    g = make_grid(1, 64, 8.0)
    f = sample_plane_wave(g, 5)
    out = laplacian(f)
    xi = 5 * g.frequency_step
    assert np.allclose(out.values, -xi ** 2 * f.values, atol=1e-12)


@given(grids, st.integers(0, 10 ** 6), st.floats(0.1, 1.9), st.floats(0.1, 1.9))
@settings(max_examples=20, deadline=None)
def test_multiplier_composition(grid_args, seed, a, b):
    g = make_grid(*grid_args)
    F = transform(random_field(g, seed))
    m1 = lambda r: np.exp(-a * r)
    m2 = lambda r: 1.0 / (1.0 + b * r ** 2)
    two = apply_radial_multiplier(apply_radial_multiplier(F, m1), m2)
    one = apply_radial_multiplier(F, lambda r: m1(r) * m2(r))
    assert np.max(np.abs(two.coeffs - one.coeffs)) <= 1e-12 * np.max(np.abs(F.coeffs))


def test_multiplier_domain_is_checked():
    g = make_grid(1, 64, 1.0)
    F = transform(random_field(g, 0))
    short = RadialSymbol(lambda r: np.ones_like(r), "short", r_max=10.0)
    with pytest.raises(MultiplierError):
        apply_radial_multiplier(F, short)
    with pytest.raises(MultiplierError), np.errstate(divide="ignore"):
        apply_radial_multiplier(F, lambda r: 1.0 / r)


def test_fractional_laplacian_and_riesz_invert_off_zero_mode():
    g = make_grid(1, 256, 16.0)
    f = sample_gaussian(g) * np.cos(g.coordinates()[0])
    back = riesz_potential(fractional_laplacian(f, 0.7), 0.7)
    f0 = f - f.mean()
    assert np.max(np.abs(back.values - f0.values)) < 1e-11


def test_fractional_laplacian_real_for_real_input():
    g = make_grid(2, 16, 2.0)
    assert not np.iscomplexobj(fractional_laplacian(random_field(g, 2), 0.5).values)


def test_gaussian_sample_and_at():
    g = make_grid(2, 32, 4.0)
    f = sample_gaussian(g, 1.0, center=[1.0, -1.0])
    assert f.at([1.0, -1.0]) == pytest.approx(1.0)
    assert f.at([0.0, 0.0]) == pytest.approx(math.exp(-1.0))


@pytest.mark.parametrize("j", [0, 2, 4])
def test_bump_support_and_bounds(j):
    g = make_grid(1, 1024, 16.0)
    w = build_window_pair()
    phi = sample_bump_j(g, j, w)
    assert not np.iscomplexobj(phi.values)
    F = transform(phi).coeffs
    r = g.radius * 2.0 ** (-j)
    assert np.max(np.abs(F[(r < 0.25) | (r > 4)])) < 1e-12
    assert np.allclose(np.abs(F[(r >= 0.5) & (r <= 2)]), 1.0, atol=1e-12)
    # even, real: transform real and symmetric
    assert np.allclose(phi.values[1:], phi.values[1:][::-1], atol=1e-12)


def test_bump_overflow_is_an_error():
    g = make_grid(1, 64, 8.0)   # nyquist 4 pi, bump j=2 reaches 16
    with pytest.raises(FrequencyOverflowError):
        sample_bump_j(g, 2, build_window_pair())


def test_bump_norm_scaling():
    g = make_grid(1, 2 ** 14, 32.0)
    w = build_window_pair()
    # exact for p = 2 by Plancherel; for p < 2 the slowly decaying tails feel the box
    for p, tol in ((1.2, 5e-3), (2.0, 1e-9)):
        norms = [lp_norm(sample_bump_j(g, j, w), p) for j in range(2, 7)]
        slopes = np.diff(np.log2(norms))
        assert np.allclose(slopes, 1 - 1 / p, atol=tol)


def test_lp_norm_examples():
    g = make_grid(1, 64, 8.0)
    assert lp_norm(Field(g, np.ones(64)), 1) == pytest.approx(16.0)
    assert lp_norm(sample_plane_wave(g, 3), 3) == pytest.approx(16.0 ** (1 / 3))
    big = make_grid(1, 1024, 16.0)
    assert lp_norm(sample_gaussian(big), 2) == pytest.approx(math.pi ** 0.25, rel=1e-8)
    assert lp_norm(Field(g, np.zeros(64)), 1.5) == 0.0
    assert lp_norm(Field(g, np.arange(64.0)), math.inf) == 63.0
    with pytest.raises(ValueError):
        lp_norm(Field(g, np.ones(64)), 0.5)


def test_lp_norm_survives_extreme_scales():
    g = make_grid(1, 64, 8.0)
    tiny = Field(g, np.full(64, 1e-200))
    assert lp_norm(tiny, 4) == pytest.approx(1e-200 * 16 ** 0.25)


@given(grids, st.integers(0, 10 ** 6), st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3),
       st.floats(1.0, 6.0))
@settings(max_examples=30, deadline=None)
def test_lp_norm_homogeneity(grid_args, seed, c, p):
    g = make_grid(*grid_args)
    f = random_field(g, seed)
    assert lp_norm(f * c, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12)


@given(grids, st.integers(0, 10 ** 6), st.floats(1.0, 6.0))
@settings(max_examples=30, deadline=None)
def test_lp_norm_triangle(grid_args, seed, p):
    g = make_grid(*grid_args)
    f, h = random_field(g, seed), random_field(g, seed + 1)
    assert lp_norm(f + h, p) <= (lp_norm(f, p) + lp_norm(h, p)) * (1 + 1e-12)


def test_spectral_field_shape_checked():
    with pytest.raises(GridError):
        SpectralField(make_grid(1, 8, 1.0), np.zeros(9))
