import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besovns.data import cosine_mode, random_field
from besovns.littlewood_paley import (
    INNER,
    OUTER,
    BesovIndex,
    DyadicSpectrum,
    active_blocks,
    besov_norm,
    block,
    build_partition,
    bump,
    cutoff,
    dyadic_spectrum,
    low_pass,
    smooth_step,
)
from besovns.spectral import ScalarField, lp_norm, make_lattice


@pytest.fixture(scope="module")
def lat32():
    return make_lattice(32)


@pytest.fixture(scope="module")
def cos4(lat32):
    return cosine_mode(lat32, (4, 0, 0))


class TestProfile:
    def test_smooth_step_limits(self):
        t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
        np.testing.assert_allclose(smooth_step(t), [0, 0, 0.5, 1, 1])

    def test_cutoff_plateau_and_zero(self):
        assert cutoff(np.array(0.7)) == 1.0
        assert cutoff(np.array(1.34)) == 0.0

    def test_bump_support(self):
        r = np.linspace(0, 4, 4001)
        b = bump(r)
        assert np.all(b[(r < INNER) | (r > OUTER)] == 0)
        assert np.all((b >= 0) & (b <= 1))
        assert bump(np.array(3.0)) == 0 and bump(np.array(0.5)) == 0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_telescoping_partition(self, r):
        total = sum(bump(np.array(r * 2.0 ** -j)) for j in range(-15, 15))
        assert abs(float(total) - 1.0) <= 1e-12


class TestPartition:
    def test_range_and_unity(self, lat32):
        P = build_partition(lat32)
        assert (P.j_min, P.j_max) == (-1, 5)
        s = P.partition_sum()
        nonzero = lat32.kabs > 0
        assert np.abs(s[nonzero] - 1).max() <= 1e-12

    def test_anisotropic_unity(self):
        lat = make_lattice((32, 8, 16), (10.0, 1.0, 3.0))
        P = build_partition(lat)
        s = P.partition_sum()
        assert np.abs(s[lat.kabs > 0] - 1).max() <= 1e-12

    def test_bump_outside_range_is_zero(self, lat32):
        P = build_partition(lat32)
        assert not P.bump(P.j_max + 3).any()


class TestBlocks:
    def test_single_mode_blocks(self, cos4, lat32):
        P = build_partition(lat32)
        assert active_blocks(cos4, P) == [1, 2]
        for j in P.js:
            if j not in (1, 2):
                assert block(cos4, j, P).is_zero()

    def test_blocks_sum_to_field(self, lat32):
        f = random_field(lat32, 0, 0)
        total = sum((block(f, j) for j in build_partition(lat32).js), ScalarField.zeros(lat32))
        assert np.abs(total.physical - f.physical).max() <= 1e-10

    def test_almost_orthogonality(self, lat32):
        f = random_field(lat32, 0, 1)
        assert block(block(f, 1), 3).is_zero()
        assert not block(block(f, 1), 2).is_zero()

    def test_low_pass_full_and_empty(self, cos4, lat32):
        f = random_field(lat32, 0, 2)
        P = build_partition(lat32)
        assert np.abs(low_pass(f, P.j_max + 2).physical - f.physical).max() <= 1e-10
        assert low_pass(cos4, 1).is_zero()

    def test_low_pass_plus_high_blocks(self, lat32):
        f = random_field(lat32, 0, 3)
        P = build_partition(lat32)
        for j in (0, 2, 4):
            high = sum((block(f, k) for k in P.js if k >= j), ScalarField.zeros(lat32))
            assert np.abs((low_pass(f, j) + high).physical - f.physical).max() <= 1e-10


class TestBesov:
    def test_b0_inf_1_of_cosine(self, cos4):
        assert abs(besov_norm(cos4, (0, np.inf, 1)) - 1) <= 1e-6

    def test_b1_inf_inf_of_cosine(self, cos4):
        # Largest weighted block is 2^2 * phi(1).
        expect = 4 * float(bump(np.array(1.0)))
        assert math.isclose(besov_norm(cos4, (1, np.inf, np.inf)), expect, rel_tol=1e-12)

    def test_zero_field(self, lat32):
        assert besov_norm(ScalarField.zeros(lat32), (1, 2, 2)) == 0.0

    @pytest.mark.parametrize("bad", [(0, 0.5, 1), (0, 2, 0), (0, 2, -1)])
    def test_rejects_bad_index(self, bad):
        with pytest.raises(ValueError):
            BesovIndex.coerce(bad)

    def test_p2_r2_zero_smoothness_matches_l2(self, lat32):
        f = random_field(lat32, 1, 0)
        # sum_j ||D_j f||^2 differs from ||f||^2 by overlaps; bounded by a factor 2.
        ratio = besov_norm(f, (0, 2, 2)) / lp_norm(f, 2)
        assert 0.5 <= ratio <= 1.0 + 1e-12

    def test_spectrum_entries_and_csv(self, cos4, tmp_path):
        sp = dyadic_spectrum(cos4, np.inf)
        assert isinstance(sp, DyadicSpectrum)
        assert [j for j, _ in sp.entries] == [1, 2]
        assert all(v >= 0 for _, v in sp.entries)
        text = sp.to_csv(tmp_path / "s.csv")
        assert text.splitlines()[0] == "j,block_norm"
        assert (tmp_path / "s.csv").read_text() == text

    def test_boundary_warning(self, lat32):
        f = cosine_mode(lat32, (15, 0, 0))
        assert dyadic_spectrum(f, 2).warnings
