"""Regularized impulsive-wave geodesics: solver, oracle checks, kink study."""

import csv

import numpy as np
import pytest

from colombeau.asymptotics import EpsGrid
from colombeau.association import standard_mollifier
from colombeau.errors import ConfigError, NonFiniteValue, OutsideDomain
from colombeau.geometry import make_handle
from colombeau.ppwave import (
    GeodesicNet,
    PPWaveProfile,
    christoffel_residual,
    default_profile,
    kink_limit_study,
    regularized_geodesic_system,
    saddle_profile,
    solve_geodesic,
    trajectory_csv,
    widened,
)

RHO = standard_mollifier()
SADDLE = default_profile()
REST_AT_X1 = (0.0, 1.0, 0.0, 0.0, 0.0, 0.0)
SPAN = (-0.5, 0.5)


def flat_profile():
    zero = make_handle(lambda p: np.zeros(p.shape[:-1] + (1,)), 2, 1, name="zero")
    return PPWaveProfile(zero)


class TestProfile:
    def test_saddle_values_and_gradient(self):
        p = np.array([[1.0, 2.0], [-0.5, 0.25]])
        f = saddle_profile()
        assert f(p)[:, 0] == pytest.approx([-3.0, 0.1875])
        prof = PPWaveProfile(f)
        g = prof.gradient(p)
        assert g[0] == pytest.approx([2.0, -4.0])
        assert g[1] == pytest.approx([-1.0, -0.5])

    def test_blowing_profile_is_rejected(self):
        def ev(p):
            with np.errstate(divide="ignore"):
                return (1.0 / (p[..., 0] - 4.0))[..., None]

        h = make_handle(ev, 2, 1, name="pole")
        with np.errstate(invalid="ignore"), pytest.raises(NonFiniteValue):
            PPWaveProfile(h, box=[(0.0, 4.0), (-1.0, 1.0)])

    def test_scalar_profile_required(self):
        h = make_handle(lambda p: p, 2, 2, name="id")
        with pytest.raises(ConfigError):
            PPWaveProfile(h)


class TestGeodesicSystem:
    def test_flat_profile_gives_zero_forcing(self):
        rhs = regularized_geodesic_system(flat_profile(), RHO, 0.1)
        out = rhs(0.0, [0.0, 1.0, -1.0, 0.3, 0.5, -0.2])
        assert out[:3] == pytest.approx([0.3, 0.5, -0.2])
        assert out[3:] == pytest.approx([0.0, 0.0, 0.0])

    def test_forcing_vanishes_ahead_of_the_pulse(self):
        rhs = regularized_geodesic_system(SADDLE, RHO, 0.05)
        out = rhs(-0.2, [0.0, 1.0, 0.5, 0.1, 0.2, 0.3])
        assert out[3:] == pytest.approx([0.0, 0.0, 0.0])

    def test_analytic_symbols_match_finite_differences(self):
        rng = np.random.default_rng(7)
        for eps in (1.0, 0.6):
            X = np.column_stack(
                [
                    rng.uniform(-0.5, 0.5, 6),
                    rng.uniform(-1.0, 1.0, 6),
                    rng.uniform(-2.0, 2.0, 6),
                    rng.uniform(-2.0, 2.0, 6),
                ]
            )
            assert christoffel_residual(SADDLE, RHO, eps, X) < 1e-8

    def test_symbol_agreement_inside_a_narrow_pulse(self):
        rng = np.random.default_rng(3)
        eps = 1e-2
        X = np.column_stack(
            [
                rng.uniform(-eps, eps, 6),
                rng.uniform(-1.0, 1.0, 6),
                rng.uniform(-2.0, 2.0, 6),
                rng.uniform(-2.0, 2.0, 6),
            ]
        )
        from colombeau.ppwave import christoffel_analytic

        scale = np.max(np.abs(christoffel_analytic(SADDLE, RHO, eps, X)))
        assert christoffel_residual(SADDLE, RHO, eps, X) / scale < 1e-8


class TestSolver:
    def test_free_motion_is_exact(self):
        s = solve_geodesic(flat_profile(), RHO, 0.1, (0.0, 0.3, 0.0, 0.0, 1.0, 0.0), SPAN)
        us = np.linspace(-0.5, 0.5, 17)
        x = s.component(us, "x")
        assert np.max(np.abs(x - (0.3 + (us + 0.5)))) < 1e-12
        assert s.energy_drift == 0.0

    def test_tangent_norm_is_conserved_across_the_pulse(self):
        s = solve_geodesic(SADDLE, RHO, 1e-2, REST_AT_X1, SPAN)
        assert s.energy_drift < 1e-7

    def test_back_integration_recovers_initial_data(self):
        s = solve_geodesic(SADDLE, RHO, 1e-2, REST_AT_X1, SPAN)
        final = s.states(np.array([0.5]))[0]
        back = solve_geodesic(SADDLE, RHO, 1e-2, tuple(final), (0.5, -0.5))
        rec = back.states(np.array([-0.5]))[0]
        assert np.max(np.abs(rec - np.array(REST_AT_X1))) < 1e-7

    def test_queries_outside_the_interval_are_rejected(self):
        s = solve_geodesic(SADDLE, RHO, 0.1, REST_AT_X1, SPAN)
        with pytest.raises(OutsideDomain):
            s.states(np.array([0.7]))

    def test_bad_initial_data_is_rejected(self):
        with pytest.raises(ConfigError):
            solve_geodesic(SADDLE, RHO, 0.1, (0.0, 1.0), SPAN)
        with pytest.raises(ConfigError):
            solve_geodesic(SADDLE, RHO, 0.1, REST_AT_X1, (0.2, 0.2))


class TestComponentNets:
    def test_transverse_net_carries_analytic_jets(self):
        gnet = GeodesicNet(SADDLE, RHO, REST_AT_X1, SPAN)
        net = gnet.component_net("x")
        eps = 0.1
        h = net.at(eps)
        u = np.array([[0.02]])
        slope = h.jet(u, (1,), 1e-6)[0, 0]
        fd = (h(u + 1e-7) - h(u - 1e-7))[0, 0] / 2e-7
        assert slope == pytest.approx(fd, rel=1e-6)
        curv = h.jet(u, (2,), 1e-5)[0, 0]
        st = gnet.slice(eps).states(np.array([0.02]))[0]
        from colombeau.ppwave import pulse

        expected = 0.5 * pulse(RHO, eps, 0.02) * 2.0 * st[1]
        assert curv == pytest.approx(expected, rel=1e-9)


class TestKinkStudy:
    GRID = EpsGrid.dyadic(6, 12)

    def test_saddle_start_at_rest_breaks_with_unit_jump(self):
        rep = kink_limit_study(SADDLE, RHO, REST_AT_X1, self.GRID)
        assert rep
        assert rep.cauchy_ok
        assert all(
            b <= a for a, b in zip(rep.cauchy_sups, rep.cauchy_sups[1:])
        )
        assert rep.cauchy_sups[-1] < 1e-3
        # pulse crossing at x near 1 with profile slope 2x: jump near 1
        assert rep.jump == pytest.approx(1.0, abs=0.01)
        assert rep.jump_stability < 0.01
        assert rep.x_cbounded
        assert rep.associated
        assert rep.assoc_routes == (True, True)

    def test_longitudinal_velocity_feature_is_flagged(self):
        rep = kink_limit_study(SADDLE, RHO, REST_AT_X1, self.GRID)
        assert "eps^-1" in rep.vdot_growth
        assert any("longitudinal" in f for f in rep.flags)

    def test_flat_profile_degenerates_to_a_straight_line(self):
        rep = kink_limit_study(flat_profile(), RHO, (0.0, 0.3, 0.0, 0.0, 1.0, 0.0), self.GRID)
        assert rep
        assert abs(rep.jump) < 1e-10
        assert rep.cauchy_sups[-1] < 1e-12

    def test_kink_is_mollifier_independent(self):
        rep1 = kink_limit_study(SADDLE, RHO, REST_AT_X1, self.GRID)
        rep2 = kink_limit_study(SADDLE, widened(RHO, 2.0), REST_AT_X1, self.GRID)
        us = np.linspace(-0.4, 0.4, 101)
        assert np.max(np.abs(rep1.kink(us) - rep2.kink(us))) < 1e-3

    def test_oversized_pulse_is_rejected(self):
        with pytest.raises(ConfigError):
            kink_limit_study(SADDLE, RHO, REST_AT_X1, EpsGrid.geometric(0.9, 0.01, 6))

    def test_report_text_is_complete(self):
        rep = kink_limit_study(SADDLE, RHO, REST_AT_X1, self.GRID)
        text = "\n".join(rep.lines())
        for key in ("velocity_jump", "cauchy", "c_bounded", "kink_break_value"):
            assert key in text


class TestTrajectoryDump:
    def test_csv_layout(self, tmp_path):
        gnet = GeodesicNet(SADDLE, RHO, REST_AT_X1, SPAN)
        path = tmp_path / "traj.csv"
        eps_values = [2.0**-6, 2.0**-8]
        trajectory_csv(gnet, eps_values, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["eps", "u", "v", "x", "y", "xdot"]
        eps_seen = sorted({float(r[0]) for r in rows[1:]}, reverse=True)
        assert eps_seen == pytest.approx(eps_values)
        # first data row starts at the left endpoint with the initial state
        first = rows[1]
        assert float(first[1]) == -0.5
        assert float(first[3]) == 1.0
        assert float(first[5]) == 0.0
