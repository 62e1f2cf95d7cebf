"""Smoother and univariate-function contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from functree.smoothers import (
    Curve,
    LevelTable,
    SmootherSpec,
    combine,
    smooth,
    spline_fit,
    thin_knots,
    weight_floor,
)


def spec(method, span=None, min_count=1):
    return SmootherSpec(method, span=span, min_count=min_count)


# ---------------------------------------------------------------------------
# Evaluable functions
# ---------------------------------------------------------------------------

def test_curve_interpolates_and_extrapolates_constant():
    c = Curve(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 1.0]))
    assert c(0.5) == 1.0
    assert c(-100.0) == 0.0
    assert c(100.0) == 1.0
    np.testing.assert_allclose(c(np.array([0.0, 1.5, 3.0])), [0.0, 1.5, 1.0])


def test_curve_single_knot_is_constant():
    c = Curve(np.array([3.0]), np.array([7.5]))
    assert c(-5.0) == 7.5 and c(99.0) == 7.5


def test_curve_rejects_unsorted_knots():
    with pytest.raises(ValueError, match="increasing"):
        Curve(np.array([1.0, 1.0]), np.array([0.0, 1.0]))


def test_level_table_default_for_unseen():
    t = LevelTable(np.array([1.0, 2.0]), default=9.0)
    assert t(0.0) == 1.0 and t(1.0) == 2.0
    assert t(2.0) == 9.0 and t(-1.0) == 9.0


def test_combine_curves_exact_on_knot_union():
    a = Curve(np.array([0.0, 2.0]), np.array([0.0, 2.0]))
    b = Curve(np.array([1.0, 3.0]), np.array([1.0, -1.0]))
    c = combine(a, b, 2.0, 3.0)
    xs = np.linspace(-1.0, 4.0, 101)
    np.testing.assert_allclose(c(xs), 2.0 * a(xs) + 3.0 * b(xs), atol=1e-14)


def test_combine_tables_pads_with_default():
    a = LevelTable(np.array([1.0, 2.0, 3.0]), default=0.0)
    b = LevelTable(np.array([10.0]), default=5.0)
    c = combine(a, b, 1.0, 1.0)
    assert c(0.0) == 11.0
    assert c(1.0) == 7.0  # 2 + b's default
    assert c(5.0) == 5.0  # both defaults


def test_thin_knots_keeps_endpoints():
    k = np.arange(1000.0)
    t = thin_knots(k, cap=100)
    assert len(t) <= 100 and t[0] == 0.0 and t[-1] == 999.0


# ---------------------------------------------------------------------------
# smooth(): categorical
# ---------------------------------------------------------------------------

def test_categorical_unweighted_means():
    x = np.array([0.0, 0.0, 1.0])
    r = np.array([1.0, 3.0, 5.0])
    f = smooth(x, r, np.ones(3), spec("categorical_mean"), center=False)
    np.testing.assert_allclose(f.values, [2.0, 5.0])


def test_categorical_weighted_mean_hand_value():
    # (1^2 * (2/1) + 2^2 * (6/2)) / (1 + 4) = 14/5 = 2.8
    x = np.array([0.0, 0.0])
    r = np.array([2.0, 6.0])
    w = np.array([1.0, 2.0])
    f = smooth(x, r, w, spec("categorical_mean"), center=False)
    assert f.values[0] == pytest.approx(2.8)


def test_categorical_min_count_fallback():
    x = np.array([0.0, 0.0, 1.0])
    r = np.array([2.0, 4.0, 10.0])
    f = smooth(x, r, np.ones(3), spec("categorical_mean", min_count=2), center=False)
    global_mean = (2.0 + 4.0 + 10.0) / 3.0
    assert f.values[0] == pytest.approx(3.0)
    assert f.values[1] == pytest.approx(global_mean)
    assert f.default == pytest.approx(global_mean)


def test_weight_one_reduces_to_plain_level_means():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 4, 60).astype(float)
    r = rng.normal(size=60)
    f = smooth(x, r, np.ones(60), spec("categorical_mean"), center=False)
    for lev in range(4):
        assert f.values[lev] == pytest.approx(r[x == lev].mean())


# ---------------------------------------------------------------------------
# smooth(): numeric
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["near_neighbor", "local_linear"])
def test_constant_ratio_gives_constant_then_zero(method):
    rng = np.random.default_rng(1)
    x = rng.normal(size=80)
    w = rng.uniform(0.5, 2.0, size=80)
    r = 3.25 * w
    raw = smooth(x, r, w, spec(method), center=False)
    np.testing.assert_allclose(raw.values, 3.25, atol=1e-12)
    centered = smooth(x, r, w, spec(method))
    np.testing.assert_allclose(centered.values, 0.0, atol=1e-12)


def test_local_linear_reproduces_exact_line():
    rng = np.random.default_rng(2)
    x = rng.uniform(-2.0, 3.0, 200)
    w = np.ones(200)
    r = 2.0 * x + 1.0
    for span in (0.1, 0.3, 1.0):
        f = smooth(x, r, w, spec("local_linear", span=span), center=False)
        np.testing.assert_allclose(f.values, 2.0 * f.knots + 1.0, atol=1e-10)


def test_near_neighbor_smooths_means():
    x = np.linspace(0.0, 1.0, 101)
    r = np.sin(2.0 * np.pi * x)
    f = smooth(x, r, np.ones(101), spec("near_neighbor", span=0.05), center=False)
    interior = (x > 0.05) & (x < 0.95)
    assert np.max(np.abs(f(x)[interior] - r[interior])) < 0.05
    # edge windows shrink on one side, so edge bias is larger but bounded
    assert np.max(np.abs(f(x) - r)) < 0.12


def test_weight_floor_excludes_rows():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    r = np.array([1.0, 1.0, 500.0, 1.0])
    w = np.array([1.0, 1.0, 1e-12, 1.0])  # third row would blow up r/w
    f = smooth(x, r, w, spec("near_neighbor", span=1.0), center=False)
    np.testing.assert_allclose(f.values, 1.0, atol=1e-9)


def test_all_rows_excluded_errors():
    with pytest.raises(ValueError, match="excluded"):
        smooth(np.ones(3), np.ones(3), np.zeros(3), spec("near_neighbor"))


def test_output_finite_far_outside_range():
    rng = np.random.default_rng(3)
    x = rng.normal(size=50)
    f = smooth(x, rng.normal(size=50), np.ones(50), spec("near_neighbor"))
    assert np.isfinite(f(np.array([-1e9, 1e9]))).all()


def test_smooth_is_deterministic():
    rng = np.random.default_rng(4)
    x = rng.normal(size=70)
    r = rng.normal(size=70)
    w = rng.uniform(0.2, 1.0, 70)
    a = smooth(x, r, w, spec("local_linear"))
    b = smooth(x, r, w, spec("local_linear"))
    np.testing.assert_array_equal(a.knots, b.knots)
    np.testing.assert_array_equal(a.values, b.values)


def test_knot_cap_by_quantile_thinning():
    rng = np.random.default_rng(5)
    x = rng.normal(size=2000)
    f = smooth(x, rng.normal(size=2000), np.ones(2000), spec("near_neighbor"))
    assert len(f.knots) <= 500


def test_precomputed_order_matches_fresh_sort():
    rng = np.random.default_rng(6)
    x = rng.normal(size=120)
    r = rng.normal(size=120)
    w = rng.uniform(0.1, 1.0, 120)
    order = np.argsort(x, kind="stable")
    a = smooth(x, r, w, spec("local_linear"), order=order, center=False)
    b = smooth(x, r, w, spec("local_linear"), center=False)
    np.testing.assert_allclose(a.values, b.values, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_near_neighbor_rank_equivariance(seed):
    # ordinates depend only on x-ranks: any strictly monotone transform of x
    # leaves the fitted values unchanged
    rng = np.random.default_rng(seed)
    x = rng.normal(size=60)
    x += 0.001 * np.arange(60)  # ensure distinctness
    r = rng.normal(size=60)
    w = rng.uniform(0.5, 1.5, size=60)
    base = smooth(x, r, w, spec("near_neighbor", span=0.2), center=False)
    trans = smooth(np.exp(x), r, w, spec("near_neighbor", span=0.2), center=False)
    np.testing.assert_allclose(np.sort(base.values), np.sort(trans.values), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_centered_output_has_zero_weighted_mean(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=50)
    r = rng.normal(size=50)
    w = rng.uniform(0.1, 2.0, size=50)
    f = smooth(x, r, w, spec("near_neighbor", span=0.3))
    mask = np.abs(w) >= weight_floor(w)
    mean = np.average(f(x[mask]), weights=w[mask] ** 2)
    assert abs(mean) < 1e-10


# ---------------------------------------------------------------------------
# spline_fit
# ---------------------------------------------------------------------------

def test_spline_constant():
    rng = np.random.default_rng(7)
    x = rng.normal(size=100)
    f = spline_fit(x, np.full(100, 4.5))
    np.testing.assert_allclose(f(x), 4.5, atol=1e-8)


def test_spline_linear_exact():
    rng = np.random.default_rng(8)
    x = rng.uniform(-1.0, 1.0, 200)
    f = spline_fit(x, x)
    np.testing.assert_allclose(f(x), x, atol=1e-8)


def test_spline_matches_normal_equations_oracle():
    # independent oracle: same truncated-power design solved by normal
    # equations, evaluated densely
    rng = np.random.default_rng(9)
    x = rng.uniform(-1.0, 1.0, 1000)
    t = np.sin(np.pi * x)
    f = spline_fit(x, t)

    lo, hi = x.min(), x.max()
    interior = np.unique(np.quantile(x, np.arange(1, 20) / 20.0))
    interior = interior[(interior > lo) & (interior < hi)]
    scale = hi - lo

    def design(v):
        u = (v - lo) / scale
        cols = [np.ones_like(u), u, u**2, u**3]
        cols += [np.clip(u - (k - lo) / scale, 0.0, None) ** 3 for k in interior]
        return np.column_stack(cols)

    A = design(x)
    beta = np.linalg.solve(A.T @ A, A.T @ t)
    dense = np.linspace(lo, hi, 1500)
    assert np.max(np.abs(f(dense) - design(dense) @ beta)) < 0.01


def test_spline_constant_x_errors():
    with pytest.raises(ValueError, match="constant"):
        spline_fit(np.ones(50), np.arange(50.0))
