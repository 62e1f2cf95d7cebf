"""Partial dependence and partial association contracts."""

import numpy as np
import pytest

import functree as ft
from functree.data import Dataset, Variable
from functree.pdengine import (
    decompose,
    default_axis,
    eval_cost,
    pa,
    pd_brute,
    pd_fast,
    resolve_points,
    write_effect_csv,
)
from functree.tree import FitConfig

from conftest import random_dataset, random_tree


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

def test_decompose_full_subset_has_no_complement():
    rng = np.random.default_rng(0)
    tree = random_tree(rng, p=4, max_nodes=10)
    data = random_dataset(rng, tree, n=80)
    dec = decompose(tree, tuple(range(4)), data)
    assert dec.alpha == 0.0
    assert dec.n_terms == tree.n_nodes
    np.testing.assert_allclose(dec.gbar, 1.0)


def test_decompose_disjoint_subset_is_constant():
    rng = np.random.default_rng(1)
    tree = random_tree(rng, p=3, max_nodes=8)
    # add two unused variables to the schema
    variables = tree.variables + (
        Variable("u1", "numeric"), Variable("u2", "numeric"),
    )
    tree = ft.FunctionTree(variables, tree.b0, tree.nodes)
    data = random_dataset(rng, tree, n=60)
    grid = pd_fast(tree, (3, 4), None, data, resolution=5)
    np.testing.assert_allclose(grid.values, 0.0, atol=1e-10)
    assert grid.alpha == 0.0


def test_reconstruction_identity():
    rng = np.random.default_rng(2)
    for _ in range(5):
        tree = random_tree(rng, p=5, max_nodes=12, categorical=(2,))
        data = random_dataset(rng, tree, n=100)
        for subset in [(0,), (1, 3), (0, 2, 4)]:
            dec = decompose(tree, subset, data)
            np.testing.assert_allclose(
                dec.reconstruct(), tree.predict(data.X), atol=1e-10
            )


def test_decompose_alpha_counts_mixed_bases(friedman_data, friedman_model):
    dec = decompose(friedman_model, (0,), friedman_data)
    mixed = sum(
        1 for k in range(1, len(friedman_model.nodes))
        if 0 in friedman_model.path_vars(k) and friedman_model.path_vars(k) != {0}
    )
    assert dec.alpha == pytest.approx(mixed / friedman_model.n_nodes)


# ---------------------------------------------------------------------------
# Fast vs brute oracle
# ---------------------------------------------------------------------------

def test_pd_fast_equals_brute_on_random_trees():
    rng = np.random.default_rng(3)
    for trial in range(5):
        tree = random_tree(rng, p=4, max_nodes=10, categorical=(1,) if trial % 2 else ())
        data = random_dataset(rng, tree, n=70)
        for subset in [(0,), (2,), (0, 2), (1, 3), (0, 1, 2)]:
            gf = pd_fast(tree, subset, None, data, resolution=6)
            gb = pd_brute(tree.predict, subset, [ax for ax in gf.axes], data)
            np.testing.assert_allclose(gf.values, gb.values, atol=1e-8)


def test_pd_fast_equals_brute_on_fitted_model(friedman_data, friedman_model):
    for subset in [(2,), (6, 7)]:
        gf = pd_fast(friedman_model, subset, None, friedman_data, resolution=7)
        gb = pd_brute(friedman_model.predict, subset, list(gf.axes), friedman_data)
        np.testing.assert_allclose(gf.values, gb.values, atol=1e-8)


def test_brute_linear_model_closed_form():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(120, 2))
    data = Dataset(
        (Variable("x1", "numeric"), Variable("x2", "numeric")), X, X[:, 0]
    )
    a = 3.0
    pts = np.array([[-1.0], [0.0], [2.0]])
    grid = pd_brute(lambda M: a * M[:, 0], (0,), pts, data)
    expected = a * pts[:, 0] - a * X[:, 0].mean()
    np.testing.assert_allclose(grid.values, expected, atol=1e-10)


def test_brute_constant_predictor_centers_to_zero():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 2))
    data = Dataset((Variable("a", "numeric"), Variable("b", "numeric")), X, X[:, 0])
    grid = pd_brute(lambda M: np.full(len(M), 7.0), (0,), np.array([[0.0], [1.0]]), data)
    np.testing.assert_allclose(grid.values, 0.0, atol=1e-12)


def test_brute_eval_counter_is_n_times_points():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 2))
    data = Dataset((Variable("a", "numeric"), Variable("b", "numeric")), X, X[:, 0])
    pts = np.array([[0.0], [1.0], [2.0]])
    grid = pd_brute(lambda M: M[:, 0], (0,), pts, data, center="none")
    assert grid.eval_count == 50 * 3


# ---------------------------------------------------------------------------
# Centering and additivity
# ---------------------------------------------------------------------------

def test_effect_grid_centering_over_data_distribution(friedman_data, friedman_model):
    # evaluating the centered effect at the rows' own subset values must
    # average to zero against the row weights
    for subset in [(2,), (3, 5)]:
        pts = friedman_data.X[:, list(subset)]
        grid = pd_fast(friedman_model, subset, pts, friedman_data)
        assert abs(np.average(grid.values, weights=friedman_data.weight)) < 1e-8


def test_root_only_tree_pd_is_zero():
    variables = (Variable("a", "numeric"), Variable("b", "numeric"))
    tree = ft.FunctionTree(variables, 5.0, [ft.TreeNode(0, -1, None, None)])
    X = np.random.default_rng(7).normal(size=(30, 2))
    data = Dataset(variables, X, X[:, 0])
    grid = pd_fast(tree, (0,), None, data, resolution=5)
    np.testing.assert_allclose(grid.values, 0.0, atol=1e-12)


def test_additive_tree_pd_is_additive(friedman_data):
    tree = ft.fit(friedman_data, FitConfig(max_order=1, max_nodes=20))
    ax0 = default_axis(friedman_data, 0, 9)
    ax2 = default_axis(friedman_data, 2, 9)
    joint = pd_fast(tree, (0, 2), [ax0, ax2], friedman_data)
    g0 = pd_fast(tree, (0,), [ax0], friedman_data)
    g2 = pd_fast(tree, (2,), [ax2], friedman_data)
    combined = g0.values[:, None] + g2.values[None, :]
    np.testing.assert_allclose(joint.grid_values(), combined, atol=1e-8)


def test_pd_matches_analytic_component_for_quadratic(friedman_data, friedman_model):
    # x3 enters the target additively as 7*x3^2; the strict 0.15 tolerance
    # runs at full benchmark scale in acceptance, this fixture is n=2500
    grid = pd_fast(friedman_model, (2,), None, friedman_data)
    x3 = friedman_data.X[:, 2]
    analytic = 7.0 * grid.points[:, 0] ** 2 - np.mean(7.0 * x3**2)
    rmsdiff = np.sqrt(np.mean((grid.values - analytic) ** 2))
    assert rmsdiff < 0.3


# ---------------------------------------------------------------------------
# Partial association
# ---------------------------------------------------------------------------

def test_pa_equals_pd_exactly_when_no_mixing(friedman_data):
    tree = ft.fit(friedman_data, FitConfig(max_order=1, max_nodes=15))
    for subset in [(0,), (2,)]:
        gpd = pd_fast(tree, subset, None, friedman_data)
        gpa = pa(tree, subset, [gpd.axes[0]], friedman_data)
        assert gpd.alpha == 0.0
        np.testing.assert_allclose(gpa.values, gpd.values, atol=1e-12)


def test_pa_subset_size_limited(friedman_data, friedman_model):
    with pytest.raises(ValueError, match="<= 2"):
        pa(friedman_model, (0, 1, 2), None, friedman_data)


def test_pa_degenerate_constant_factor_falls_back():
    # a mixed basis whose z-side factor is constant uses the plain mean
    variables = (Variable("a", "numeric"), Variable("b", "numeric"))
    const = ft.Curve(np.array([0.0]), np.array([2.0]))
    ident = ft.Curve(np.array([-5.0, 5.0]), np.array([-5.0, 5.0]))
    nodes = [
        ft.TreeNode(0, -1, None, None),
        ft.TreeNode(1, 0, 0, const),
        ft.TreeNode(2, 1, 1, ident),
    ]
    tree = ft.FunctionTree(variables, 0.0, nodes)
    rng = np.random.default_rng(8)
    X = rng.normal(size=(200, 2))
    data = Dataset(variables, X, tree.predict(X))
    gpd = pd_fast(tree, (0,), None, data, resolution=9)
    gpa = pa(tree, (0,), [gpd.axes[0]], data)
    np.testing.assert_allclose(gpa.values, gpd.values, atol=1e-10)


# ---------------------------------------------------------------------------
# Cost accounting and plumbing
# ---------------------------------------------------------------------------

def test_eval_cost_formula(friedman_data, friedman_model):
    from types import SimpleNamespace

    dec = decompose(friedman_model, (0,), friedman_data)
    assert eval_cost(dec, 1000, 50) == 50 + dec.alpha * 1000
    dec_all = decompose(friedman_model, tuple(range(8)), friedman_data)
    assert eval_cost(dec_all, 1000, 50) == 50  # alpha = 0: no mixed bases
    assert eval_cost(SimpleNamespace(alpha=1.0), 1000, 1000) == 2000


def test_default_axis_quantiles_and_levels():
    rng = np.random.default_rng(9)
    variables = (
        Variable("n", "numeric"),
        Variable("c", "categorical", levels=("a", "b", "c")),
    )
    X = np.column_stack([rng.normal(size=200), rng.integers(0, 3, 200).astype(float)])
    data = Dataset(variables, X, X[:, 0])
    ax_n = default_axis(data, 0, 50)
    ax_c = default_axis(data, 1)
    assert len(ax_n) == 50
    assert X[:, 0].min() <= ax_n[0] < ax_n[-1] <= X[:, 0].max()
    np.testing.assert_array_equal(ax_c, [0.0, 1.0, 2.0])


def test_resolve_points_forms(friedman_data):
    pts, axes = resolve_points(friedman_data, (0, 1), None, resolution=5)
    assert pts.shape == (25, 2) and len(axes) == 2
    explicit = np.array([[0.0, 1.0], [2.0, 3.0]])
    pts2, axes2 = resolve_points(friedman_data, (0, 1), explicit)
    np.testing.assert_array_equal(pts2, explicit)
    assert axes2 is None
    with pytest.raises(ValueError, match="one column"):
        resolve_points(friedman_data, (0, 1), np.zeros((4, 3)))


def test_effect_csv_export(tmp_path, friedman_data, friedman_model):
    grid = pd_fast(friedman_model, (6, 7), None, friedman_data, resolution=4)
    out = tmp_path / "g.csv"
    write_effect_csv(grid, out, friedman_data.variables)
    lines = out.read_text().splitlines()
    assert lines[0] == "# kind: pd"
    assert lines[1] == "# subset: x7;x8"
    header_at = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
    assert lines[header_at] == "x7,x8,value"
    assert len(lines) == header_at + 1 + grid.n_points
    # values round-trip through repr
    first = lines[header_at + 1].split(",")
    assert float(first[2]) == grid.values[0]
