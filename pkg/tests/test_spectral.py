import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovns.data import random_field, random_velocity
from besovns.spectral import (
    CubeTransform,
    ScalarField,
    VelocityField,
    dealias,
    derivative,
    divergence_residual,
    gradient,
    leray_project,
    lp_norm,
    make_lattice,
    resample,
    spectral_l2_norm,
)


@pytest.fixture(scope="module")
def lat16():
    return make_lattice(16)


def _field(lat, fn):
    x1, x2, x3 = lat.grid()
    return ScalarField.from_physical(lat, fn(x1, x2, x3))


class TestLattice:
    def test_integer_wavenumbers_for_unit_period(self):
        lat = make_lattice(8, 2 * math.pi)
        for axis in (1, 2, 3):
            np.testing.assert_allclose(lat.axis_wavenumbers(axis), np.arange(-4, 4), atol=1e-15)

    def test_spacing_follows_period(self):
        lat = make_lattice(16, 4 * math.pi)
        assert np.allclose(np.diff(lat.axis_wavenumbers(1)), 0.5)

    @pytest.mark.parametrize("n", [7, 4, 12, 0])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            make_lattice(n, 1.0)

    def test_rejects_nonpositive_period(self):
        with pytest.raises(ValueError):
            make_lattice(8, 0.0)

    def test_anisotropic_lattice(self):
        lat = make_lattice((16, 8, 32), (1.0, 2.0, 3.0))
        assert lat.shape == (16, 8, 32)
        assert lat.spectral_shape == (16, 8, 17)
        assert math.isclose(lat.cell_volume, 6.0 / (16 * 8 * 32))


class TestFields:
    def test_round_trip(self, lat16):
        f = random_field(lat16, 1, 0)
        back = ScalarField.from_physical(lat16, f.physical)
        assert np.abs(back.physical - f.physical).max() <= 1e-12 * np.abs(f.physical).max()

    def test_nyquist_zeroed(self, lat16):
        f = ScalarField.from_physical(lat16, np.random.default_rng(0).standard_normal(lat16.shape))
        assert np.all(f.spectral[~lat16.nyquist_free] == 0)

    def test_hermitian_plane_is_real_field(self, lat16):
        f = random_field(lat16, 2, 0)
        assert np.isrealobj(f.physical)
        plane = f.spectral[:, :, 0]
        n = lat16.shape[0]
        idx = (-np.arange(n)) % n
        np.testing.assert_allclose(plane, np.conj(plane[idx][:, idx]), atol=1e-12)

    def test_velocity_components_share_lattice(self, lat16):
        other = make_lattice(8)
        with pytest.raises(ValueError):
            VelocityField.from_components([ScalarField.zeros(lat16), ScalarField.zeros(lat16),
                                           ScalarField.zeros(other)])


class TestDerivative:
    def test_sine_to_cosine(self, lat16):
        f = _field(lat16, lambda x, y, z: np.sin(x))
        expect = np.cos(lat16.grid()[0])
        assert np.abs(derivative(f, 1).physical - expect).max() <= 1e-12

    def test_constant_has_zero_derivative(self, lat16):
        f = _field(lat16, lambda x, y, z: 3.0 + 0 * x)
        assert np.abs(derivative(f, 2).physical).max() <= 1e-13

    def test_third_axis_double_frequency(self, lat16):
        f = _field(lat16, lambda x, y, z: np.sin(2 * z))
        expect = 2 * np.cos(2 * lat16.grid()[2])
        assert np.abs(derivative(f, 3).physical - expect).max() <= 1e-12

    def test_rejects_bad_axis(self, lat16):
        with pytest.raises(ValueError):
            derivative(ScalarField.zeros(lat16), 0)


class TestLeray:
    def test_annihilates_gradients(self, lat16):
        g = _field(lat16, lambda x, y, z: np.sin(x) * np.cos(y))
        assert np.abs(leray_project(gradient(g)).physical).max() <= 1e-12

    def test_keeps_shear(self, lat16):
        x2 = lat16.grid()[1]
        u = VelocityField.from_physical(lat16, np.stack([np.sin(x2), 0 * x2, 0 * x2]))
        assert np.abs(leray_project(u).physical - u.physical).max() <= 1e-13

    def test_kills_compressive_mode(self, lat16):
        x1 = lat16.grid()[0]
        u = VelocityField.from_physical(lat16, np.stack([np.sin(x1), 0 * x1, 0 * x1]))
        assert np.abs(leray_project(u).physical).max() <= 1e-13

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_idempotent_and_divergence_free(self, sample):
        lat = make_lattice(16)
        u = VelocityField.from_components([random_field(lat, 5, 3 * sample + a) for a in range(3)])
        once = leray_project(u)
        twice = leray_project(once)
        assert np.abs(twice.spectral - once.spectral).max() <= 1e-12 * np.abs(once.spectral).max()
        assert divergence_residual(once) <= 1e-10

    def test_commutes_with_derivative(self, lat16):
        u = VelocityField.from_components([random_field(lat16, 6, a) for a in range(3)])
        a = leray_project(VelocityField.from_components([derivative(c, 2) for c in u.components]))
        b = VelocityField.from_components([derivative(c, 2) for c in leray_project(u).components])
        assert np.abs(a.spectral - b.spectral).max() <= 1e-10 * np.abs(a.spectral).max()


class TestNorms:
    def test_constant_l2(self):
        lat = make_lattice(8)
        one = ScalarField.from_physical(lat, np.ones(lat.shape))
        assert math.isclose(lp_norm(one, 2), (2 * math.pi) ** 1.5, rel_tol=1e-12)

    def test_cosine_sup_and_l2(self):
        lat = make_lattice(8)
        f = _field(lat, lambda x, y, z: np.cos(x))
        assert math.isclose(lp_norm(f, np.inf), 1.0, rel_tol=1e-14)
        assert math.isclose(lp_norm(f, 2), (2 * math.pi) ** 1.5 / math.sqrt(2), rel_tol=1e-10)

    def test_rejects_small_p(self, lat16):
        with pytest.raises(ValueError):
            lp_norm(ScalarField.zeros(lat16), 0.5)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000))
    def test_parseval(self, sample):
        lat = make_lattice(16, (1.0, 2.0, 3.0))
        f = random_field(lat, 7, sample)
        assert math.isclose(lp_norm(f, 2), spectral_l2_norm(f), rel_tol=1e-10)


class TestDealias:
    def test_keeps_low_cube(self, lat16):
        f = _field(lat16, lambda x, y, z: np.cos(5 * x + 3 * y - 2 * z))
        assert np.abs(dealias(f).physical - f.physical).max() <= 1e-13

    def test_removes_high_mode(self, lat16):
        f = _field(lat16, lambda x, y, z: np.cos(7 * x))
        assert np.abs(dealias(f).physical).max() <= 1e-13

    def test_white_noise_support(self, lat16):
        f = ScalarField.from_physical(lat16, np.random.default_rng(1).standard_normal(lat16.shape))
        d = dealias(f).spectral
        assert np.all(d[~lat16.dealias_mask] == 0)
        m1, m2, m3 = lat16.modes
        keep = (np.abs(m1)[:, None, None] <= 16 // 3) & (np.abs(m2)[None, :, None] <= 16 // 3) \
            & (m3[None, None, :] <= 16 // 3)
        assert np.array_equal(lat16.dealias_mask, keep)


class TestCubeTransform:
    def test_matches_full_transforms(self):
        lat = make_lattice((16, 32, 8), (1.0, 2.0, 3.0))
        cube = CubeTransform(lat)
        u = random_velocity(lat, 3, 0)
        c = cube.compact(u.spectral)
        assert np.array_equal(cube.expand(c), u.spectral)
        assert np.abs(cube.to_physical(c) - u.physical).max() <= 1e-13
        assert np.abs(cube.to_spectral(u.physical) - c).max() <= 1e-10 * np.abs(c).max()


class TestResample:
    def test_band_limited_field_survives_refinement(self, lat16):
        f = random_field(lat16, 8, 0)
        fine = resample(f, make_lattice(32))
        back = resample(fine, lat16)
        assert np.abs(back.spectral - f.spectral).max() <= 1e-12 * np.abs(f.spectral).max()
        assert math.isclose(lp_norm(fine, 2), lp_norm(f, 2), rel_tol=1e-12)
