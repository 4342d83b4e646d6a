import math

import numpy as np
import pytest

from besovns.criterion import scale_to_lhs
from besovns.data import random_field, random_velocity, shear_flow
from besovns.navier_stokes import (
    STATUSES,
    SolveConfig,
    apriori_balance,
    heat_transport_integral,
    nonlinear_rhs,
    rotational_rhs,
    solve,
    static_transport_bound,
    transport_rewrite_residual,
)
from besovns.spectral import ScalarField, VelocityField, make_lattice


@pytest.fixture(scope="module")
def lat16():
    return make_lattice(16)


def _velocity(lat, a, b, c):
    return VelocityField.from_physical(lat, np.stack([a, b, c]))


class TestIdentities:
    def test_rewrite_on_random_fields(self, lat16):
        for i in range(5):
            assert transport_rewrite_residual(random_velocity(lat16, 9, i)) <= 1e-9

    def test_rewrite_on_shear(self, lat16):
        assert transport_rewrite_residual(shear_flow(lat16), relative=False) <= 1e-14

    def test_negative_control(self, lat16):
        x1 = lat16.grid()[0]
        w = _velocity(lat16, np.sin(x1), 0 * x1, 0 * x1)
        assert transport_rewrite_residual(w) > 0.1

    def test_rhs_forms_agree(self, lat16):
        v = random_velocity(lat16, 9, 10, amplitude=0.3)
        U = random_velocity(lat16, 9, 11)
        a = nonlinear_rhs(v, U).spectral
        b = rotational_rhs(v, U).spectral
        assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()

    def test_rhs_of_shear_and_zero(self, lat16):
        zero = VelocityField.zeros(lat16)
        assert np.abs(nonlinear_rhs(zero, shear_flow(lat16)).physical).max() <= 1e-14
        assert nonlinear_rhs(zero, zero).is_zero()

    def test_rhs_is_projected(self, lat16):
        from besovns.spectral import divergence_residual
        rhs = nonlinear_rhs(VelocityField.zeros(lat16), random_velocity(lat16, 9, 12))
        assert divergence_residual(rhs) <= 1e-12

    def test_rhs_lattice_mismatch(self, lat16):
        with pytest.raises(ValueError):
            nonlinear_rhs(VelocityField.zeros(lat16), VelocityField.zeros(make_lattice(8)))


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(dt=0), dict(T=-1), dict(eta=0), dict(p=0.5),
                                        dict(monitor_every=0), dict(scheme="euler")])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SolveConfig(**kwargs).validate()


class TestSolve:
    def test_shear_flow_stays_heat_solution(self, lat16):
        tr = solve(shear_flow(lat16), SolveConfig(dt=0.01, T=0.5))
        assert tr.status == "completed"
        assert max(tr.monitor_inf) <= 1e-10
        assert np.abs(tr.final_v.physical).max() <= 1e-10
        # energy of e^{-t} sin x2 decays like e^{-2t}
        assert math.isclose(tr.energy[-1] / tr.energy[0], math.exp(-1.0), rel_tol=1e-10)

    def test_zero_data(self, lat16):
        tr = solve(VelocityField.zeros(lat16), SolveConfig(dt=0.05, T=0.2))
        assert tr.status == "completed" and max(tr.monitor_inf) == 0 and tr.energy[-1] == 0

    def test_energy_and_divergence(self, lat16):
        u = random_velocity(lat16, 3, 0, kmax=4.0)
        tr = solve(u, SolveConfig(dt=5e-3, T=0.25, eta=10))
        e = np.asarray(tr.energy)
        assert np.all(np.diff(e) <= 1e-3 * e[0])
        assert max(tr.div_residual) <= 1e-9
        assert tr.times == sorted(tr.times)

    def test_bootstrap_exit(self, lat16):
        u = random_velocity(lat16, 3, 0, kmax=4.0, amplitude=2.0)
        tr = solve(u, SolveConfig(dt=5e-3, T=0.5, eta=1e-4, monitor_every=1))
        assert tr.status == "bootstrap-exit"
        assert tr.gamma_hit is not None and tr.monitor_inf[-1] > 1e-4
        assert all(m <= 1e-4 for m in tr.monitor_inf[:-1])

    def test_gamma_none_when_below_eta(self, lat16):
        u = random_velocity(lat16, 3, 1, kmax=4.0, amplitude=0.01)
        tr = solve(u, SolveConfig(dt=0.01, T=0.1))
        assert tr.gamma_hit is None and tr.max_monitor <= 0.1

    def test_cfl_violation(self, lat16):
        u = random_velocity(lat16, 3, 0, kmax=4.0, amplitude=50.0)
        with pytest.raises(ValueError, match="advective"):
            solve(u, SolveConfig(dt=0.1, T=0.2))

    def test_preconditions(self, lat16):
        x1 = lat16.grid()[0]
        with pytest.raises(ValueError, match="divergence"):
            solve(_velocity(lat16, np.sin(x1), 0 * x1, 0 * x1), SolveConfig(dt=0.01, T=0.1))
        with pytest.raises(ValueError, match="mean"):
            solve(_velocity(lat16, 1 + 0 * x1, 0 * x1, 0 * x1), SolveConfig(dt=0.01, T=0.1))
        with pytest.raises(ValueError, match="multiple"):
            solve(shear_flow(lat16), SolveConfig(dt=0.03, T=0.1))
        with pytest.raises(ValueError, match="n="):
            solve(shear_flow(lat16), SolveConfig(n=32))

    def test_temporal_order(self):
        lat = make_lattice(16)
        u = random_velocity(lat, 5, 0, kmax=4.0)
        T = 0.2

        def final(dt):
            return solve(u, SolveConfig(dt=dt, T=T, eta=10, monitor_every=10 ** 6)).final_v.spectral

        ref = final(T / 320)
        errs = [np.abs(final(dt) - ref).max() for dt in (T / 10, T / 20, T / 40)]
        orders = np.log2(np.asarray(errs[:-1]) / errs[1:])
        assert orders.min() >= 3.5

    def test_trace_csv_header(self, lat16, tmp_path):
        tr = solve(shear_flow(lat16), SolveConfig(dt=0.05, T=0.1))
        text = tr.to_csv(tmp_path / "t.csv")
        lines = text.splitlines()
        assert lines[0].startswith("# config: ") and lines[1].startswith("# config_sha256: ")
        assert lines[2] == "t,monitor_inf,monitor_l1,energy,div_residual"
        assert tr.status in STATUSES


class TestBalance:
    def test_shear_is_degenerate(self, lat16):
        u = shear_flow(lat16)
        tr = solve(u, SolveConfig(dt=0.05, T=0.2, track_balance=True, monitor_every=1))
        rep = apriori_balance(tr, u)
        assert rep["degenerate"]

    def test_small_data_ratio_bounded_and_refinement_stable(self, lat16):
        u = random_velocity(lat16, 6, 0, kmax=4.0)
        u, _ = scale_to_lhs(u, 1e-3)
        reps = []
        for dt in (0.02, 0.01):
            tr = solve(u, SolveConfig(dt=dt, T=0.2, track_balance=True, monitor_every=int(0.02 / dt)))
            reps.append(apriori_balance(tr, u))
        a, b = reps
        assert a["max_ratio"] <= 10
        assert abs(a["max_ratio"] / b["max_ratio"] - 1) <= 0.05

    def test_requires_balance_data(self, lat16):
        tr = solve(shear_flow(lat16), SolveConfig(dt=0.05, T=0.1))
        with pytest.raises(ValueError):
            apriori_balance(tr, shear_flow(lat16))

    def test_heat_transport_against_static_bound(self):
        from besovns.data import example2_data
        u = example2_data(0.125)
        i2 = heat_transport_integral(u, 4.0)
        assert 0 < i2 <= 10 * static_transport_bound(u, 4.0)
