import math

import numpy as np
import pytest

from besovns.criterion import (
    CriterionInput,
    ScalingSeries,
    SweepPoint,
    assemble_lhs,
    criterion_lhs,
    example_point,
    example_sweep,
    rescale,
    rescale_box,
    scale_to_lhs,
    scaling_fit,
    sweep_fits,
    sweep_to_csv,
)
from besovns.data import random_velocity, shear_flow
from besovns.littlewood_paley import besov_norm
from besovns.spectral import ScalarField, VelocityField, make_lattice


@pytest.fixture(scope="module")
def u32():
    return random_velocity(make_lattice(32), 4, 0, kmax=8.0, amplitude=0.5)


class TestCriterion:
    def test_report_fields(self, u32):
        rep = criterion_lhs(CriterionInput(u32, p=4))
        assert rep.lhs > 0
        assert math.isclose(rep.lhs, assemble_lhs(rep.norm_sum_comp, rep.norm_first_two,
                                                  rep.caloric_2, rep.caloric_1), rel_tol=1e-14)
        assert rep.exp_factor >= 1
        assert rep.below_delta == (rep.lhs <= rep.delta)

    def test_zero_field(self):
        rep = criterion_lhs(CriterionInput(VelocityField.zeros(make_lattice(16))))
        assert rep.lhs == 0 and rep.exp_factor == 1.0

    def test_shear_has_vanishing_second_factor_only_when_u1_u2_vanish(self):
        rep = criterion_lhs(CriterionInput(shear_flow(make_lattice(16))))
        assert rep.norm_first_two > 0 and rep.lhs > 0

    @pytest.mark.parametrize("p", [3.0, 6.0, 2.0])
    def test_rejects_p(self, u32, p):
        with pytest.raises(ValueError):
            criterion_lhs(CriterionInput(u32, p=p))

    def test_rejects_compressible(self):
        lat = make_lattice(16)
        x1 = lat.grid()[0]
        u = VelocityField.from_physical(lat, np.stack([np.sin(x1), 0 * x1, 0 * x1]))
        with pytest.raises(ValueError):
            criterion_lhs(CriterionInput(u))

    def test_monotone_in_each_factor(self):
        base = dict(norm_sum_comp=0.1, norm_first_two=0.2, caloric_2=0.3, caloric_1=0.4)
        ref = assemble_lhs(**base)
        for key in base:
            bumped = dict(base, **{key: base[key] * 1.01})
            assert assemble_lhs(**bumped) > ref

    def test_scale_to_lhs(self, u32):
        scaled, rep = scale_to_lhs(u32, 1e-3)
        assert math.isclose(rep.lhs, 1e-3, rel_tol=1e-9)
        with pytest.raises(ValueError):
            scale_to_lhs(VelocityField.zeros(make_lattice(16)), 1e-3)


class TestRescale:
    def test_identity(self, u32):
        assert np.array_equal(rescale(u32, 1).spectral, u32.spectral)

    def test_single_mode_doubles(self):
        lat = make_lattice(16)
        x2 = lat.grid()[1]
        u = VelocityField.from_physical(lat, np.stack([np.sin(x2), 0 * x2, 0 * x2]))
        v = rescale(u, 2)
        assert np.abs(v.physical[0] - 2 * np.sin(2 * x2)).max() <= 1e-12

    def test_rejects_non_power(self, u32):
        with pytest.raises(ValueError):
            rescale(u32, 3)

    def test_critical_norm_ratio(self):
        lat = make_lattice(32)
        u = random_velocity(lat, 2, 0, kmax=5.0)
        p = 4.0
        idx = (-1 + 3 / p, p, 1)
        for op in (rescale, rescale_box):
            ratio = besov_norm(op(u, 2)[0], idx) / besov_norm(u[0], idx)
            assert 0.5 <= ratio <= 2


class TestScalingFit:
    eps = [2.0 ** -k for k in range(3, 8)]

    def test_pure_power(self):
        slope, r2 = scaling_fit(ScalingSeries(self.eps, [e ** 0.5 for e in self.eps]))
        assert abs(slope - 0.5) <= 1e-10 and abs(r2 - 1) <= 1e-12

    def test_log_correction(self):
        y = [e ** 0.5 * math.log(1 / e) ** 0.2 for e in self.eps]
        slope, _ = scaling_fit(ScalingSeries(self.eps, y, log_correction=0.2))
        assert abs(slope - 0.5) <= 1e-10

    def test_loglog_and_divisors(self):
        y = [e ** -0.25 * math.log(math.log(1 / e)) ** 0.5 * 3.0 for e in self.eps]
        slope, _ = scaling_fit(ScalingSeries(self.eps, y, 0.5, "loglog", [3.0] * 5))
        assert abs(slope + 0.25) <= 1e-10

    def test_needs_enough_points(self):
        with pytest.raises(ValueError):
            scaling_fit(ScalingSeries(self.eps[:3], [1.0, 2.0, 3.0]))
        with pytest.raises(ValueError):
            scaling_fit(ScalingSeries([0.5, 0.45, 0.4, 0.35], [1, 2, 3, 4]))


class TestSweeps:
    def test_example2_two_points(self, tmp_path):
        pts = example_sweep(2, [2.0 ** -3, 2.0 ** -4], 4.0)
        assert [p.eps for p in pts] == [0.125, 0.0625]
        fits = sweep_fits(2, pts)
        assert fits["lhs_decreasing"] and fits["largeness_increasing"]
        text = sweep_to_csv(pts, tmp_path / "s.csv", header="# x\n")
        assert text.splitlines()[1].startswith("eps,alpha,p,norm_sum_comp")
        assert (tmp_path / "s.csv").read_text() == text

    def test_example1_point(self):
        pt = example_point(1, 0.125, 5.0, 0.9)
        assert pt.report.lhs > 0 and pt.report.largeness > 0
        assert pt.row()["alpha"] == 0.9

    def test_unknown_example(self):
        with pytest.raises(ValueError):
            example_point(3, 0.125, 4.0)
