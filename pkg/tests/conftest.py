"""Shared fixtures: small fitted models reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

import functree as ft
from functree.data import NUMERIC, CATEGORICAL, Dataset, Variable
from functree.smoothers import Curve, LevelTable
from functree.tree import FunctionTree, TreeNode


@pytest.fixture(scope="session")
def friedman_data():
    return ft.gen_friedman(2500, seed=41)


@pytest.fixture(scope="session")
def friedman_model(friedman_data):
    return ft.fit(friedman_data, ft.FitConfig())


def random_tree(rng: np.random.Generator, p: int = 6, max_nodes: int = 15,
                categorical: tuple[int, ...] = ()) -> FunctionTree:
    """Random small tree over p variables; function values kept modest so
    deep path products stay well scaled."""
    variables = []
    for j in range(p):
        if j in categorical:
            levels = tuple(f"l{i}" for i in range(rng.integers(2, 5)))
            variables.append(Variable(f"v{j}", CATEGORICAL, levels=levels))
        else:
            variables.append(Variable(f"v{j}", NUMERIC, observed_range=(-2.0, 2.0)))
    nodes = [TreeNode(0, -1, None, None)]
    n_nodes = int(rng.integers(1, max_nodes + 1))
    for k in range(1, n_nodes + 1):
        parent = int(rng.integers(0, k))
        var = int(rng.integers(0, p))
        if variables[var].is_categorical:
            vals = rng.uniform(-1.2, 1.2, size=len(variables[var].levels))
            func = LevelTable(vals, float(vals.mean()))
        else:
            knots = np.sort(rng.uniform(-2.0, 2.0, size=int(rng.integers(2, 8))))
            knots = np.unique(knots)
            func = Curve(knots, rng.uniform(-1.2, 1.2, size=len(knots)))
        nodes.append(TreeNode(k, parent, var, func))
    return FunctionTree(tuple(variables), float(rng.normal()), nodes)


def random_dataset(rng: np.random.Generator, tree: FunctionTree, n: int = 150) -> Dataset:
    cols = []
    for v in tree.variables:
        if v.is_categorical:
            cols.append(rng.integers(0, v.n_levels, size=n).astype(float))
        else:
            cols.append(rng.normal(0.0, 1.0, size=n))
    X = np.column_stack(cols)
    y = tree.predict(X) + rng.normal(0.0, 0.1, size=n)
    return Dataset(tree.variables, X, y)
