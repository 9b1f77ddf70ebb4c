import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colombeau.asymptotics import EpsGrid, estimate_growth_order
from colombeau.errors import (
    AtlasMismatch,
    BallEscapesChart,
    ConfigError,
    CoverGap,
    NoMetric,
    OutsideDomain,
)
from colombeau.geometry import (
    Atlas,
    Chart,
    CompactSet,
    VBAtlas,
    affine_transition,
    chord_distance,
    constant_metric,
    default_test_bank,
    euclidean_atlas,
    identity_transition,
    load_atlas,
    make_box_bump,
    make_bump,
    make_vbhom_test,
    partition_of_unity,
    polar_inverse_transition,
    polar_transition,
    riemannian_distance,
    trivial_bundle,
)

PLANE = euclidean_atlas(2)


class TestAtlasInvariants:
    def test_inverse_pair_required(self):
        t = identity_transition(1)
        with pytest.raises(AtlasMismatch):
            Atlas(
                [Chart("a", [(-1, 1)]), Chart("b", [(-1, 1)])],
                transitions={("a", "b"): t},
            )

    def test_non_inverse_pair_rejected(self):
        shift = affine_transition([[1.0]], [1.0])
        with pytest.raises(AtlasMismatch):
            Atlas(
                [Chart("a", [(-3, 1)]), Chart("b", [(-1, 3)])],
                transitions={("a", "b"): shift, ("b", "a"): shift},
            )

    def test_valid_shift_pair(self):
        fwd = affine_transition([[1.0]], [1.0])
        back = affine_transition([[1.0]], [-1.0])
        atlas = Atlas(
            [Chart("a", [(-3, 1)]), Chart("b", [(-2, 2)])],
            transitions={("a", "b"): fwd, ("b", "a"): back},
        )
        assert atlas.to_chart(np.array([0.5]), "a", "b") == pytest.approx(1.5)

    def test_polar_pair_accepted(self):
        atlas = Atlas(
            [Chart("disk", [(0.1, 2.0), (0.2, 1.2)]), Chart("plane", [(-3, 3), (-3, 3)])],
            transitions={
                ("disk", "plane"): polar_transition(),
                ("plane", "disk"): polar_inverse_transition(),
            },
        )
        y = atlas.to_chart(np.array([1.0, 0.5]), "disk", "plane")
        assert y == pytest.approx([math.cos(0.5), math.sin(0.5)])

    def test_indefinite_metric_rejected(self):
        with pytest.raises(AtlasMismatch):
            Atlas(
                [Chart("main", [(-1, 1), (-1, 1)])],
                metric={"main": constant_metric([[1, 2], [2, 1]])},
            )

    def test_asymmetric_metric_rejected(self):
        with pytest.raises(AtlasMismatch):
            Atlas(
                [Chart("main", [(-1, 1), (-1, 1)])],
                metric={"main": constant_metric([[1, 0.5], [0, 1]])},
            )

    def test_locate_prefers_explicit_chart(self):
        cid, x = PLANE.locate(("main", [0.3, 0.4]))
        assert cid == "main"
        with pytest.raises(OutsideDomain):
            PLANE.locate(("main", [99.0, 0.0]))

    def test_dimension_consistency(self):
        with pytest.raises(AtlasMismatch):
            Atlas([Chart("a", [(-1, 1)]), Chart("b", [(-1, 1), (-1, 1)])])


class TestVBAtlas:
    def _three_chart_base(self):
        box = [(-1, 1)]
        ids = ("a", "b", "c")
        t = {}
        for i in ids:
            for j in ids:
                if i != j:
                    t[(i, j)] = identity_transition(1)
        return Atlas([Chart(i, box) for i in ids], transitions=t)

    def test_cocycle_holds(self):
        base = self._three_chart_base()
        ft = {
            ("a", "b"): lambda x: np.broadcast_to(2.0 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("b", "a"): lambda x: np.broadcast_to(0.5 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("b", "c"): lambda x: np.broadcast_to(3.0 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("c", "b"): lambda x: np.broadcast_to(np.eye(1) / 3.0, x.shape[:-1] + (1, 1)).copy(),
            ("a", "c"): lambda x: np.broadcast_to(6.0 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("c", "a"): lambda x: np.broadcast_to(np.eye(1) / 6.0, x.shape[:-1] + (1, 1)).copy(),
        }
        vb = VBAtlas(base, 1, fiber_transitions=ft)
        assert vb.fiber_transition("a", "b", np.zeros((1,)))[0, 0] == 2.0

    def test_cocycle_violation_rejected(self):
        base = self._three_chart_base()
        ft = {
            ("a", "b"): lambda x: np.broadcast_to(2.0 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("b", "a"): lambda x: np.broadcast_to(0.5 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("b", "c"): lambda x: np.broadcast_to(3.0 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("c", "b"): lambda x: np.broadcast_to(np.eye(1) / 3.0, x.shape[:-1] + (1, 1)).copy(),
            ("a", "c"): lambda x: np.broadcast_to(5.0 * np.eye(1), x.shape[:-1] + (1, 1)).copy(),
            ("c", "a"): lambda x: np.broadcast_to(np.eye(1) / 5.0, x.shape[:-1] + (1, 1)).copy(),
        }
        with pytest.raises(AtlasMismatch):
            VBAtlas(base, 1, fiber_transitions=ft)

    def test_identity_fiber_transition(self):
        vb = trivial_bundle(PLANE, 3)
        m = vb.fiber_transition("main", "main", np.zeros(2))
        assert np.array_equal(m, np.eye(3))


class TestRiemannianDistance:
    def test_euclidean_three_four_five(self):
        assert riemannian_distance(PLANE, [0, 0], [3, 4]) == pytest.approx(5.0, abs=1e-6)

    def test_coincident_points(self):
        assert riemannian_distance(PLANE, [1.2, -0.3], [1.2, -0.3]) == 0.0

    def test_constant_diag_metric(self):
        atlas = Atlas(
            [Chart("main", [(-5, 5), (-5, 5)])],
            metric={"main": constant_metric([[4, 0], [0, 1]])},
        )
        assert riemannian_distance(atlas, [0, 0], [1, 0]) == pytest.approx(2.0, abs=1e-3)

    def test_no_metric_raises(self):
        bare = Atlas([Chart("main", [(-1, 1)])])
        with pytest.raises(NoMetric):
            riemannian_distance(bare, [0.0], [0.5])

    def test_outside_atlas_raises(self):
        with pytest.raises(OutsideDomain):
            riemannian_distance(PLANE, [0, 0], [100, 0])

    @given(
        st.lists(st.floats(-2, 2), min_size=6, max_size=6),
    )
    @settings(max_examples=10, deadline=None)
    def test_symmetry_and_triangle(self, coords):
        p = np.array(coords[0:2])
        q = np.array(coords[2:4])
        r = np.array(coords[4:6])
        atlas = Atlas(
            [Chart("main", [(-5, 5), (-5, 5)])],
            metric={"main": constant_metric([[2, 0.3], [0.3, 1]])},
        )
        dpq = riemannian_distance(atlas, p, q)
        dqp = riemannian_distance(atlas, q, p)
        dpr = riemannian_distance(atlas, p, r)
        drq = riemannian_distance(atlas, r, q)
        assert dpq == pytest.approx(dqp, rel=2e-3, abs=1e-9)
        assert dpq <= dpr + drq + 2e-3 * (dpr + drq) + 1e-9

    def test_cross_chart_distance(self):
        fwd = identity_transition(1)
        atlas = Atlas(
            [Chart("a", [(-3, 1)]), Chart("b", [(-1, 3)])],
            transitions={("a", "b"): fwd, ("b", "a"): identity_transition(1)},
            metric={"a": constant_metric([[1.0]]), "b": constant_metric([[1.0]])},
        )
        d = riemannian_distance(atlas, ("a", [-2.0]), ("b", [2.0]))
        assert d == pytest.approx(4.0, rel=1e-6)

    def test_rate_verdicts_agree_across_metrics(self):
        # "for some (hence every) metric": decay rates of distances between
        # point nets do not depend on the metric chosen
        grid = EpsGrid.default()
        m1 = Atlas(
            [Chart("main", [(-5, 5), (-5, 5)])],
            metric={"main": constant_metric([[1, 0], [0, 1]])},
        )
        m2 = Atlas(
            [Chart("main", [(-5, 5), (-5, 5)])],
            metric={"main": constant_metric([[4, 1], [1, 2]])},
        )
        for rate in (lambda e: e, lambda e: math.exp(-1 / e)):
            def p(e, _r=rate):
                return np.array([_r(e), 0.0])
            q = np.zeros(2)
            d1 = [chord_distance(m1, "main", p(e), q) for e in grid]
            d2 = [chord_distance(m2, "main", p(e), q) for e in grid]
            v1 = estimate_growth_order(d1, grid)
            v2 = estimate_growth_order(d2, grid)
            assert v1.classification == v2.classification
            assert v1.order == v2.order


class TestBumps:
    def test_center_value_one(self):
        b = make_bump([0.0, 0.0], 0.5, 1.0)
        assert b(np.zeros(2)) == pytest.approx([1.0])

    def test_outside_value_zero(self):
        b = make_bump([0.0, 0.0], 0.5, 1.0)
        assert b(np.array([1.5, 0.0])) == pytest.approx([0.0], abs=0.0)

    def test_radial_symmetry(self):
        b = make_bump([0.3, -0.2], 0.4, 0.9)
        rng = np.random.default_rng(7)
        for _ in range(20):
            v = rng.normal(size=2)
            plus = b(np.array([0.3, -0.2]) + v * 0.1)
            minus = b(np.array([0.3, -0.2]) - v * 0.1)
            assert plus == pytest.approx(minus, abs=1e-13)

    def test_range_and_monotone_band(self):
        b = make_bump([0.0], 0.5, 1.0)
        xs = np.linspace(-1.2, 1.2, 241)[:, None]
        vals = b(xs)[:, 0]
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        inner = np.abs(xs[:, 0]) <= 0.5
        outer = np.abs(xs[:, 0]) >= 1.0
        assert np.all(vals[inner] == 1.0)
        assert np.all(vals[outer] == 0.0)

    def test_bad_radii(self):
        with pytest.raises(BallEscapesChart):
            make_bump([0.0], 1.0, 0.5)

    def test_ball_escapes_box(self):
        with pytest.raises(BallEscapesChart):
            make_bump([0.9], 0.5, 1.0, box=[(-1, 1)])

    def test_analytic_jets_match_fd(self):
        b = make_bump([0.0, 0.0], 0.5, 1.0)
        import copy

        raw = copy.copy(b)
        raw.jet_impl = None
        raw.jet_fn = None
        raw.k_max = 0
        for pt in ([0.7, 0.1], [0.6, -0.4], [0.2, 0.2]):
            x = np.array(pt)
            for alpha in [(1, 0), (0, 1), (1, 1), (2, 0)]:
                an = b.jet(x, alpha, 1e-4)[0]
                fd = raw.jet(x, alpha, 1e-4)[0]
                assert fd == pytest.approx(an, rel=1e-5, abs=1e-7)

    def test_box_bump_support(self):
        b = make_box_bump([(-0.5, 0.5), (-0.5, 0.5)], [(-1, 1), (-1, 1)])
        assert b(np.zeros(2)) == pytest.approx([1.0])
        assert b(np.array([1.1, 0.0]))[0] == 0.0
        assert b(np.array([0.0, 0.45])) == pytest.approx([1.0])
        assert 0.0 < b(np.array([0.9, 0.9]))[0] < 0.01


class TestVBHomTest:
    def test_core_point_is_trivialization(self):
        vb = trivial_bundle(PLANE, 2)
        t = make_vbhom_test(vb, "main", (np.zeros(2), 1.0, 2.0), coord_index=0)
        xi = np.array([0.5, -1.5])
        base, fiber = t(np.array([0.3, 0.1]), xi)
        assert base == pytest.approx(0.3)
        assert fiber == pytest.approx(xi)

    def test_outside_support_zero(self):
        vb = trivial_bundle(PLANE, 2)
        t = make_vbhom_test(vb, "main", (np.zeros(2), 1.0, 2.0))
        base, fiber = t(np.array([3.0, 3.0]), np.array([1.0, 1.0]))
        assert base == 0.0
        assert np.all(fiber == 0.0)

    def test_fiber_linearity(self):
        vb = trivial_bundle(PLANE, 2)
        t = make_vbhom_test(vb, "main", (np.zeros(2), 1.0, 2.0))
        x = np.array([1.2, 0.4])
        _, f1 = t(x, np.array([1.0, 2.0]))
        _, f2 = t(x, np.array([2.0, 4.0]))
        assert f2 == pytest.approx(2 * f1)

    def test_support_escape_rejected(self):
        vb = trivial_bundle(euclidean_atlas(2, 1.5), 1)
        with pytest.raises(BallEscapesChart):
            make_vbhom_test(vb, "main", (np.array([1.0, 0.0]), 0.5, 1.0))


class TestPartitionOfUnity:
    def test_single_core_is_one(self):
        atlas = euclidean_atlas(1, 5.0)
        members = partition_of_unity(atlas, [CompactSet("main", [(-2, 2)])])
        assert len(members) == 1
        xs = np.linspace(-2, 2, 21)[:, None]
        assert np.allclose(members[0].handle(xs), 1.0)

    def test_two_overlapping_intervals(self):
        atlas = euclidean_atlas(1, 5.0)
        cores = [CompactSet("main", [(-2.0, 0.5)]), CompactSet("main", [(-0.5, 2.0)])]
        members = partition_of_unity(atlas, cores)
        xs = np.linspace(-2, 2, 41)[:, None]
        total = sum(m.handle(xs) for m in members)
        assert np.max(np.abs(total - 1.0)) < 1e-9

    def test_lonely_point_gets_full_weight(self):
        atlas = euclidean_atlas(1, 5.0)
        cores = [CompactSet("main", [(-2.0, -1.0)]), CompactSet("main", [(1.0, 2.0)])]
        members = partition_of_unity(atlas, cores)
        assert members[0].handle(np.array([-1.5]))[0] == pytest.approx(1.0)
        assert members[1].handle(np.array([-1.5]))[0] == pytest.approx(0.0, abs=1e-12)

    def test_cover_gap_detected(self):
        # cores are far apart; a sampled point of one core is never the
        # problem, so force the gap by shrinking the margin to zero width
        atlas = euclidean_atlas(1, 50.0)
        cores = [CompactSet("main", [(-30.0, -29.0)]), CompactSet("main", [(29.0, 30.0)])]
        members = partition_of_unity(atlas, cores)
        # disjoint cores are each fully covered by their own bump
        assert members[0].handle(np.array([-29.5]))[0] == pytest.approx(1.0)


class TestDefaultBank:
    def test_bank_size_and_support(self):
        region = CompactSet("main", [(-1, 1), (-1, 1)])
        bank = default_test_bank(PLANE, region, size=16)
        assert len(bank) == 16
        rng = np.random.default_rng(3)
        for t in bank.scalar_tests:
            lo, hi = t.support_box[:, 0], t.support_box[:, 1]
            for _ in range(10):
                # points outside the support box (inflate away from it)
                direction = rng.normal(size=2)
                direction /= np.linalg.norm(direction)
                far = 0.5 * (lo + hi) + direction * (hi - lo) * 2.0
                if np.all(far >= PLANE.chart("main").box[:, 0]) and np.all(
                    far <= PLANE.chart("main").box[:, 1]
                ):
                    assert abs(t.handle(far)[0]) == 0.0

    def test_cutoff_is_one_on_region(self):
        region = CompactSet("main", [(-1, 1), (-1, 1)])
        bank = default_test_bank(PLANE, region)
        plateau = bank.scalar_tests[0]
        pts = region.sample_points()
        assert np.allclose(plateau.handle(pts), 1.0)

    def test_vbhoms_when_bundle_given(self):
        region = CompactSet("main", [(-1, 1), (-1, 1)])
        vb = trivial_bundle(PLANE, 2)
        bank = default_test_bank(PLANE, region, vb=vb)
        assert len(bank.vbhom_tests) == 2
        assert len(bank.densities) == 2


class TestAtlasFile:
    def test_round_trip(self, tmp_path):
        text = """
[atlas]
dim = 2
name = demo

[chart:main]
box = -5 5; -5 5
metric = 1 + x1^2, 0; 0, 1

[chart:shift]
box = -4 6; -5 5

[transition:main->shift]
type = affine
matrix = 1 0; 0 1
offset = 1 0
"""
        path = tmp_path / "atlas.ini"
        path.write_text(text)
        atlas = load_atlas(path)
        assert atlas.dim == 2
        assert atlas.name == "demo"
        assert set(atlas.charts) == {"main", "shift"}
        y = atlas.to_chart(np.array([0.0, 0.0]), "main", "shift")
        assert y == pytest.approx([1.0, 0.0])
        back = atlas.to_chart(y, "shift", "main")
        assert back == pytest.approx([0.0, 0.0])
        g = atlas.metric_at("main", np.array([1.0, 0.0]))
        assert g == pytest.approx(np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_missing_atlas_section(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[chart:main]\nbox = -1 1\n")
        with pytest.raises(ConfigError):
            load_atlas(path)

    def test_unknown_transition_type(self, tmp_path):
        path = tmp_path / "bad2.ini"
        path.write_text(
            "[atlas]\ndim = 1\n[chart:a]\nbox = -1 1\n[chart:b]\nbox = -1 1\n"
            "[transition:a->b]\ntype = wormhole\n"
        )
        with pytest.raises(ConfigError):
            load_atlas(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_atlas("/nonexistent/atlas.ini")
