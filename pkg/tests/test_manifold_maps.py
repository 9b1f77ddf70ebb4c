import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colombeau.asymptotics import EpsGrid
from colombeau.errors import (
    AtlasMismatch,
    NotCBounded,
    OutsideDomain,
)
from colombeau.geometry import (
    Atlas,
    Chart,
    CompactSet,
    affine_transition,
    euclidean_atlas,
)
from colombeau.manifold_maps import (
    GeneralizedManifoldPoint,
    ManifoldNet,
    adversarial_gpoint,
    check_cbounded,
    check_equivalent,
    check_moderate,
    check_pointvalue_equality,
    compose,
    constant_gpoint,
    gpoints_equivalent,
    point_value,
    random_gpoints,
    single_chart_map,
)
from colombeau.nets import net_from_function

LINE = euclidean_atlas(1, 10.0)
PLANE = euclidean_atlas(2, 10.0)
K1 = CompactSet("main", [(-1.0, 1.0)])


def oscillator(power=1):
    # exact jets keep the derivative sups clean down to the smallest eps;
    # a finite difference aliases once the period drops below its step
    def fn(e, x):
        return np.sin(x / e**power)

    def jet(e, x, alpha):
        k = alpha[0]
        table = [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)]
        return e ** (-power * k) * table[k % 4](x[..., :1] / e**power)

    return single_chart_map(
        LINE, LINE, fn, jet=jet, label=f"sin(x/e^{power})"
    )


def identity_map():
    return single_chart_map(LINE, LINE, lambda e, x: x, label="x")


def perturbed_identity(scale=1.0):
    return single_chart_map(
        LINE, LINE, lambda e, x: x + scale * np.exp(-1.0 / e), label="x+negl"
    )


def smooth_step(e, x):
    t = np.clip(x[..., 0] / e, -50.0, 50.0)
    return (0.5 * (1.0 + np.tanh(t)))[..., None]


def wild_map():
    """Bounded values, derivatives growing like exp(k/eps).

    Finite differences saturate near 1/step and cannot see growth this
    fast, so the net carries its exact jets.
    """

    def fn(e, x):
        return np.sin(np.exp(1.0 / e) * x)

    def jet(e, x, alpha):
        k = alpha[0]
        w = np.exp(k / e) if k else 1.0
        phase = np.exp(1.0 / e) * x[..., 0]
        table = [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)]
        return (w * table[k % 4](phase))[..., None]

    return single_chart_map(LINE, LINE, fn, jet=jet, label="sin(exp(1/e)x)")


# grid kept coarse enough that exp(1/eps) stays inside float range
SHORT_GRID = EpsGrid.dyadic(4, 9)


class TestCBounded:
    def test_oscillator_is_cbounded(self):
        report = check_cbounded(oscillator(), K1)
        assert report.ok
        assert report.witness is not None
        box = report.witness.box
        assert box[0, 0] <= -1.0 and box[0, 1] >= 1.0

    def test_blowup_fails_but_bank_stays_bounded(self):
        blow = single_chart_map(
            LINE, LINE, lambda e, x: np.full_like(x, 1.0 / e), label="1/e"
        )
        report = check_cbounded(blow, K1)
        assert not report.ok
        assert report.diagnostics["escape_eps"] is not None
        # compactly supported tests cannot see the escape to infinity
        assert report.diagnostics["bank_bounded"]

    def test_constant_map_witness_hugs_the_point(self):
        const = single_chart_map(
            LINE, LINE, lambda e, x: np.full_like(x, 0.7), label="const"
        )
        report = check_cbounded(const, K1)
        assert report.ok
        box = report.witness.box
        assert box[0, 0] < 0.7 < box[0, 1]
        assert box[0, 1] - box[0, 0] < 0.1

    def test_identity_witness_contains_k(self):
        report = check_cbounded(identity_map(), K1)
        assert report.ok
        assert report.witness.box[0, 0] < -1.0 < 1.0 < report.witness.box[0, 1]


class TestModerate:
    def test_oscillator_order_matches_derivative_count(self):
        report = check_moderate(oscillator(), K1, k_max=2)
        assert bool(report)
        assert report.verdict.classification == "moderate"
        assert report.verdict.order == 2
        assert report.chart_route_agrees

    @pytest.mark.parametrize("power", [1, 2])
    def test_order_calibration(self, power):
        # k-th derivative of sin(x/e^p) carries e^{-pk}
        report = check_moderate(oscillator(power), K1, k_max=1)
        assert report.verdict.classification == "moderate"
        assert report.verdict.order == power
        slopes = [
            v.slope
            for label, k, v in report.per_test
            if label == "x0*cutoff" and k == 1
        ]
        assert abs(slopes[0] + power) < 0.1

    def test_identity_is_order_zero(self):
        report = check_moderate(identity_map(), K1, k_max=2)
        assert report.verdict.classification == "moderate"
        assert report.verdict.order == 0
        assert report.chart_route_agrees

    def test_wild_net_is_neither(self):
        with np.errstate(over="ignore", invalid="ignore"):
            report = check_moderate(wild_map(), K1, k_max=2, grid=SHORT_GRID)
        assert not bool(report)
        assert report.verdict.classification == "neither"
        assert report.chart_route_agrees

    def test_blowup_raises_not_cbounded(self):
        blow = single_chart_map(
            LINE, LINE, lambda e, x: np.full_like(x, 1.0 / e), label="1/e"
        )
        with pytest.raises(NotCBounded):
            check_moderate(blow, K1)

    def test_report_lists_only_plateau_tests(self):
        report = check_moderate(identity_map(), K1, k_max=1)
        labels = {label for label, _, _ in report.per_test}
        assert all("bump" not in label for label in labels)
        assert any("cutoff" in label for label in labels)


class TestEquivalence:
    def test_negligible_perturbation_is_equivalent(self):
        report = check_equivalent(identity_map(), perturbed_identity(), K1)
        assert report.equivalent
        assert report.route_distance and report.route_bank and report.route_chart

    def test_different_rates_are_not_equivalent(self):
        ex = single_chart_map(LINE, LINE, lambda e, x: e * x, label="e*x")
        e2x2 = single_chart_map(
            LINE, LINE, lambda e, x: e**2 * x**2, label="e^2x^2"
        )
        report = check_equivalent(ex, e2x2, K1)
        assert not report.equivalent
        assert not (report.route_distance or report.route_bank or report.route_chart)

    def test_polynomial_gap_is_not_equivalent(self):
        # eps*x decays, but not below every power
        u = identity_map()
        v = single_chart_map(LINE, LINE, lambda e, x: x + e * x, label="x+e*x")
        report = check_equivalent(u, v, K1)
        assert not report.equivalent

    def test_shifted_step_is_not_equivalent_to_step(self):
        H = single_chart_map(LINE, LINE, smooth_step, label="H_e")
        H_shift = single_chart_map(
            LINE, LINE, lambda e, x: smooth_step(e, x - e), label="H_e(x-e)"
        )
        report = check_equivalent(H, H_shift, K1)
        assert not report.equivalent

    def test_equal_nets_are_equivalent_with_derivatives(self):
        report = check_equivalent(
            identity_map(), perturbed_identity(), K1, derivative_order=1
        )
        assert report.equivalent

    def test_order_zero_verdict_matches_higher_order(self):
        pairs = [
            (identity_map(), perturbed_identity()),
            (
                single_chart_map(LINE, LINE, lambda e, x: e * x, label="e*x"),
                single_chart_map(
                    LINE, LINE, lambda e, x: e**2 * x**2, label="e^2x^2"
                ),
            ),
        ]
        for u, v in pairs:
            r0 = check_equivalent(u, v, K1, derivative_order=0)
            r2 = check_equivalent(u, v, K1, derivative_order=2)
            assert r0.equivalent == r2.equivalent

    def test_blowup_raises(self):
        blow = single_chart_map(
            LINE, LINE, lambda e, x: np.full_like(x, 1.0 / e), label="1/e"
        )
        with pytest.raises((NotCBounded, Exception)):
            check_equivalent(identity_map(), blow, K1)

    @settings(max_examples=4, deadline=None)
    @given(scale=st.floats(min_value=0.1, max_value=50.0))
    def test_verdict_ignores_perturbation_scale(self, scale):
        report = check_equivalent(identity_map(), perturbed_identity(scale), K1)
        assert report.equivalent

    def test_symmetry(self):
        u = identity_map()
        v = perturbed_identity()
        assert (
            check_equivalent(u, v, K1).equivalent
            == check_equivalent(v, u, K1).equivalent
        )


class TestGeneralizedPoints:
    def test_constant_point_round_trip(self):
        p = constant_gpoint(K1, [0.3])
        cid, x = p.at(0.05)
        assert cid == "main"
        assert np.allclose(x, [0.3])
        assert p.check_support()

    def test_point_leaving_support_raises(self):
        runaway = GeneralizedManifoldPoint(
            lambda e: np.array([2.0]), K1, label="outside"
        )
        with pytest.raises(OutsideDomain):
            runaway.check_support()

    def test_random_points_are_reproducible(self):
        a = random_gpoints(K1, 5, seed=11)
        b = random_gpoints(K1, 5, seed=11)
        for p, q in zip(a, b):
            assert np.allclose(p.at(0.1)[1], q.at(0.1)[1])

    def test_drifting_point_equals_limit_only_if_negligible(self):
        base = constant_gpoint(K1, [0.0])
        poly = GeneralizedManifoldPoint(lambda e: np.array([e]), K1)
        fast = GeneralizedManifoldPoint(lambda e: np.array([np.exp(-1.0 / e)]), K1)
        assert not gpoints_equivalent(LINE, base, poly)
        assert gpoints_equivalent(LINE, base, fast)


class TestPointValues:
    def test_square_at_moving_point(self):
        sq = single_chart_map(LINE, LINE, lambda e, x: x**2, label="x^2")
        p = GeneralizedManifoldPoint(lambda e: np.array([1.0 + e]), K1)
        pv = point_value(sq, p)
        for eps in (0.5, 0.125):
            cid, val = pv.at(eps)
            assert np.allclose(val, (1.0 + eps) ** 2)

    def test_shift_at_origin_is_not_the_origin(self):
        shift = single_chart_map(LINE, LINE, lambda e, x: x + e, label="x+e")
        pv = point_value(shift, constant_gpoint(K1, [0.0]))
        assert not gpoints_equivalent(LINE, pv, constant_gpoint(K1, [0.0]))

    def test_point_values_separate_inequivalent_nets(self):
        ex = single_chart_map(LINE, LINE, lambda e, x: e * x, label="e*x")
        e2x2 = single_chart_map(
            LINE, LINE, lambda e, x: e**2 * x**2, label="e^2x^2"
        )
        ok, info = check_pointvalue_equality(
            ex, e2x2, [constant_gpoint(K1, [0.5])], K=K1
        )
        assert not ok
        assert info["failed_points"]

    def test_point_values_agree_for_equivalent_nets(self):
        pts = random_gpoints(K1, 8, seed=5)
        ok, info = check_pointvalue_equality(
            identity_map(), perturbed_identity(), pts, K=K1
        )
        assert ok
        assert not info["failed_points"]

    def test_adversarial_point_finds_the_gap(self):
        u = identity_map()
        v = single_chart_map(LINE, LINE, lambda e, x: x + e, label="x+e")
        grid = EpsGrid.default()
        adv = adversarial_gpoint(u, v, K1, grid)
        pu = point_value(u, adv)
        pv = point_value(v, adv)
        assert not gpoints_equivalent(LINE, pu, pv)


class TestComposition:
    def test_eval_chains_left_to_right(self):
        double = single_chart_map(LINE, LINE, lambda e, x: 2.0 * x, label="2x")
        sq = single_chart_map(LINE, LINE, lambda e, x: x**2, label="x^2")
        comp = compose(double, sq)
        _, y = comp.eval(0.1, np.array([[0.5]]), "main")
        assert np.allclose(y, [[1.0]])

    def test_mismatched_middle_atlas_raises(self):
        to_plane = single_chart_map(
            LINE, PLANE, lambda e, x: np.concatenate([x, x], axis=-1), label="diag"
        )
        on_line = identity_map()
        with pytest.raises(AtlasMismatch):
            compose(to_plane, on_line)

    def test_composition_respects_equivalence(self):
        # composing with a fixed smooth net preserves ~
        sq = single_chart_map(LINE, LINE, lambda e, x: x**2 / 2.0, label="x^2/2")
        left = compose(identity_map(), sq)
        right = compose(perturbed_identity(), sq)
        report = check_equivalent(left, right, K1)
        assert report.equivalent

    def test_point_value_commutes_with_composition(self):
        half = single_chart_map(LINE, LINE, lambda e, x: 0.5 * x, label="x/2")
        sq = single_chart_map(LINE, LINE, lambda e, x: x**2, label="x^2")
        comp = compose(half, sq)
        p = constant_gpoint(K1, [0.8])
        direct = point_value(comp, p)
        staged = point_value(sq, point_value(half, p))
        assert gpoints_equivalent(LINE, direct, staged)


class TestChartRepresentations:
    def _two_chart_target(self):
        fwd = affine_transition(np.eye(1), np.array([-2.0]))
        back = affine_transition(np.eye(1), np.array([2.0]))
        return Atlas(
            [Chart("A", [(-10, 10)]), Chart("B", [(-10, 10)])],
            transitions={("A", "B"): fwd, ("B", "A"): back},
        )

    def test_consistent_representations_accepted(self):
        tgt = self._two_chart_target()
        box = LINE.chart("main").box
        nA = net_from_function(lambda e, x: x, 1, 1, box=box)
        nB = net_from_function(lambda e, x: x - 2.0, 1, 1, box=box)
        u = ManifoldNet(LINE, tgt, {("main", "A"): nA, ("main", "B"): nB})
        cid, y = u.eval(0.1, np.array([[0.5]]), "main")
        assert cid == "A"
        assert np.allclose(y, [[0.5]])

    def test_disagreeing_representations_rejected(self):
        tgt = self._two_chart_target()
        box = LINE.chart("main").box
        nA = net_from_function(lambda e, x: x, 1, 1, box=box)
        nB = net_from_function(lambda e, x: x + 2.1, 1, 1, box=box)
        with pytest.raises(AtlasMismatch):
            ManifoldNet(LINE, tgt, {("main", "A"): nA, ("main", "B"): nB})
