import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colombeau.asymptotics import (
    MODERATE,
    NEGLIGIBLE,
    NEITHER,
    EpsGrid,
    dump_fit_csv,
    estimate_growth_order,
    gnum_equal,
    gpoint_equivalent,
    is_negligible,
    negligible_to_resolution,
)
from colombeau.errors import (
    DimensionMismatch,
    GridTooShort,
    NonFiniteValue,
    NotCompactlySupported,
)
from colombeau.nets import GeneralizedNumber

GRID = EpsGrid.default()


def curve(fn):
    return [fn(e) for e in GRID]


def curve_on(grid, fn):
    return [fn(e) for e in grid]


class TestEpsGrid:
    def test_default_is_dyadic(self):
        assert GRID.values[0] == 2.0**-4
        assert GRID.values[-1] == 2.0**-20
        assert len(GRID) == 17

    def test_too_short(self):
        with pytest.raises(GridTooShort):
            EpsGrid((0.5, 0.25, 0.125))

    def test_not_decreasing(self):
        with pytest.raises(GridTooShort):
            EpsGrid((0.1, 0.2, 0.3, 0.4, 0.5, 0.6))

    def test_out_of_range(self):
        with pytest.raises(GridTooShort):
            EpsGrid((2.0, 1.0, 0.5, 0.25, 0.125, 0.0625))

    def test_geometric(self):
        g = EpsGrid.geometric(0.1, 1e-5, 9)
        assert len(g) == 9
        assert g.values[0] == pytest.approx(0.1)
        assert g.values[-1] == pytest.approx(1e-5)


class TestEstimateGrowthOrder:
    def test_inverse_cubic_is_moderate_3(self):
        v = estimate_growth_order(curve(lambda e: e**-3), GRID)
        assert v.classification == MODERATE
        assert v.order == 3
        assert v.slope == pytest.approx(-3.0, abs=0.1)

    def test_exp_decay_is_negligible_mmax(self):
        v = estimate_growth_order(curve(lambda e: math.exp(-1 / e)), GRID)
        assert v.classification == NEGLIGIBLE
        assert v.order == v.tested_order_cap

    def test_exp_growth_is_neither(self):
        # on a short grid where float64 still holds exp(1/eps), the slope
        # itself lands far below -N_max
        short = EpsGrid.dyadic(4, 9)
        v = estimate_growth_order(curve_on(short, lambda e: math.exp(1 / e)), short)
        assert v.classification == NEITHER
        # on the default grid the same curve overflows, same verdict
        with np.errstate(over="ignore"):
            vals = np.exp(1.0 / GRID.as_array())
        v2 = estimate_growth_order(vals, GRID)
        assert v2.classification == NEITHER

    def test_overflowing_samples_are_neither(self):
        # exp(1/eps) overflows float64 well before eps = 2^-20
        vals = []
        for e in GRID:
            try:
                vals.append(math.exp(1 / e))
            except OverflowError:
                vals.append(float("inf"))
        v = estimate_growth_order(vals, GRID)
        assert v.classification == NEITHER
        assert v.diagnostics.get("overflow") or v.diagnostics.get("reason")

    def test_zero_samples_negligible(self):
        v = estimate_growth_order([0.0] * len(GRID), GRID)
        assert v.classification == NEGLIGIBLE
        assert v.order == v.tested_order_cap

    def test_bounded_is_moderate_0(self):
        v = estimate_growth_order(curve(lambda e: 2.0 + math.sin(1 / e)), GRID)
        assert v.classification == MODERATE
        assert v.order == 0

    def test_eps_squared_negligible_2(self):
        v = estimate_growth_order(curve(lambda e: e**2), GRID)
        assert v.classification == NEGLIGIBLE
        assert v.order == 2
        assert v.slope == pytest.approx(2.0, abs=0.1)

    def test_linear_negligible_1(self):
        v = estimate_growth_order(curve(lambda e: 3 * e), GRID)
        assert v.classification == NEGLIGIBLE
        assert v.order == 1

    def test_nan_raises(self):
        vals = curve(lambda e: e)
        vals[3] = float("nan")
        with pytest.raises(NonFiniteValue):
            estimate_growth_order(vals, GRID)

    def test_negative_raises(self):
        with pytest.raises(NonFiniteValue):
            estimate_growth_order([-1.0] * len(GRID), GRID)

    def test_steeper_than_nmax_is_neither(self):
        v = estimate_growth_order(curve(lambda e: e**-14), GRID)
        assert v.classification == NEITHER

    def test_callable_and_dict_inputs(self):
        by_call = estimate_growth_order(lambda e: e**2, GRID)
        by_dict = estimate_growth_order({e: e**2 for e in GRID}, GRID)
        assert by_call.slope == pytest.approx(by_dict.slope)

    @given(st.floats(1e-3, 1e3))
    @settings(max_examples=30, deadline=None)
    def test_scaling_leaves_slope_alone(self, c):
        base = estimate_growth_order(curve(lambda e: e**-2), GRID)
        scaled = estimate_growth_order(curve(lambda e: c * e**-2), GRID)
        assert scaled.slope == pytest.approx(base.slope, abs=0.25)
        assert scaled.classification == base.classification

    @given(st.integers(-8, 6))
    @settings(max_examples=20, deadline=None)
    def test_pure_powers_recover_exponent(self, p):
        v = estimate_growth_order(curve(lambda e: e**p), GRID)
        assert v.slope == pytest.approx(p, abs=0.1)


class TestIsNegligible:
    def test_eps_squared(self):
        ok2, _ = is_negligible(curve(lambda e: e**2), GRID, 2)
        ok3, _ = is_negligible(curve(lambda e: e**2), GRID, 3)
        assert ok2 and not ok3

    def test_zero_curve_any_order(self):
        for m in range(0, 9):
            ok, _ = is_negligible([0.0] * len(GRID), GRID, m)
            assert ok

    def test_log_factor_borderline(self):
        vals = curve(lambda e: e * abs(math.log(e)))
        ok_default, diag = is_negligible(vals, GRID, 1)
        assert ok_default
        assert diag.get("borderline")
        ok_tight, _ = is_negligible(vals, GRID, 1, ratio_bound=10.0)
        assert not ok_tight

    def test_monotonicity(self):
        big = curve(lambda e: e**3)
        small = [0.5 * v for v in big]
        ok_big, _ = is_negligible(big, GRID, 3)
        ok_small, _ = is_negligible(small, GRID, 3)
        assert ok_big and ok_small

    @given(st.integers(1, 6), st.floats(0.1, 0.9))
    @settings(max_examples=25, deadline=None)
    def test_pointwise_domination(self, m, scale):
        base = curve(lambda e: e**m)
        dominated = [scale * v for v in base]
        ok, _ = is_negligible(base, GRID, m)
        ok_dom, _ = is_negligible(dominated, GRID, m)
        assert not ok or ok_dom


class TestGnumEqual:
    def test_linear_difference_is_not_equal(self):
        a = GeneralizedNumber(lambda e: np.array([2 * e]), 1)
        b = GeneralizedNumber.constant([0.0])
        assert not gnum_equal(a, b, GRID)

    def test_exponentially_close_is_equal(self):
        a = GeneralizedNumber(lambda e: np.array([math.exp(-1 / e)]), 1)
        b = GeneralizedNumber.constant([0.0])
        assert gnum_equal(a, b, GRID)

    def test_reflexive(self):
        a = GeneralizedNumber(lambda e: np.array([math.sin(1 / e), e]), 2)
        assert gnum_equal(a, a, GRID)

    def test_symmetric(self):
        a = GeneralizedNumber(lambda e: np.array([e**9]), 1)
        b = GeneralizedNumber.constant([0.0])
        assert gnum_equal(a, b, GRID) == gnum_equal(b, a, GRID)

    def test_dimension_mismatch(self):
        a = GeneralizedNumber.constant([0.0])
        b = GeneralizedNumber.constant([0.0, 0.0])
        with pytest.raises(DimensionMismatch):
            gnum_equal(a, b, GRID)

    def test_transitive_with_margin(self):
        a = GeneralizedNumber.constant([1.0])
        b = GeneralizedNumber(lambda e: np.array([1.0 + math.exp(-2 / e)]), 1)
        c = GeneralizedNumber(lambda e: np.array([1.0 - math.exp(-2 / e)]), 1)
        assert gnum_equal(a, b, GRID) and gnum_equal(b, c, GRID)
        assert gnum_equal(a, c, GRID)


def euclid(a, b):
    return float(np.linalg.norm(a - b))


class TestGpointEquivalent:
    def test_eps_offset_not_equivalent(self):
        p = GeneralizedNumber(lambda e: np.array([e, 0.0]), 2)
        q = GeneralizedNumber.constant([0.0, 0.0])
        ok, _ = gpoint_equivalent(p, q, GRID, euclid)
        assert not ok

    def test_exponential_offset_equivalent(self):
        q = GeneralizedNumber(lambda e: np.array([0.3, -0.1]), 2)
        p = GeneralizedNumber(
            lambda e: q.at(e) + math.exp(-1 / e) * np.ones(2), 2
        )
        ok, _ = gpoint_equivalent(p, q, GRID, euclid)
        assert ok

    def test_bounded_oscillation_equivalent(self):
        p = GeneralizedNumber(
            lambda e: np.array([math.sin(1 / e) * math.exp(-1 / e), 0.0]), 2
        )
        q = GeneralizedNumber.constant([0.0, 0.0])
        ok, _ = gpoint_equivalent(p, q, GRID, euclid)
        assert ok

    def test_unbounded_net_raises(self):
        p = GeneralizedNumber(lambda e: np.array([1 / e]), 1)
        q = GeneralizedNumber.constant([0.0])
        with pytest.raises(NotCompactlySupported):
            gpoint_equivalent(p, q, GRID, euclid)

    def test_bank_route_agrees(self):
        bank = [lambda x: np.sin(x).sum(), lambda x: np.exp(-np.sum(x**2))]
        p = GeneralizedNumber(lambda e: np.array([e, 0.0]), 2)
        q = GeneralizedNumber.constant([0.0, 0.0])
        ok, diag = gpoint_equivalent(p, q, GRID, euclid, test_bank=bank)
        assert not ok
        assert diag["test_bank_agrees"]


def test_csv_dump_roundtrip(tmp_path):
    vals = curve(lambda e: e**2)
    v = estimate_growth_order(vals, GRID)
    out = tmp_path / "fit.csv"
    text = dump_fit_csv(vals, GRID, v, out)
    lines = text.strip().splitlines()
    assert lines[0] == "eps,value,fit"
    assert len(lines) == len(GRID) + 1
    assert out.read_text() == text
    eps0, val0, fit0 = (float(t) for t in lines[1].split(","))
    assert eps0 == pytest.approx(2.0**-4)
    assert val0 == pytest.approx(eps0**2)
    assert fit0 == pytest.approx(val0, rel=0.5)


def test_negligible_to_resolution_boundary():
    assert negligible_to_resolution(curve(lambda e: e**9), GRID)
    assert not negligible_to_resolution(curve(lambda e: e**5), GRID)
