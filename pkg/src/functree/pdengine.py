"""Partial dependence and partial association over function trees.

A tree model restricted to a variable subset z splits every basis function
into a product of its z-side factors and its complement-side factors. Partial
dependence then needs only the data means of the complement products, turning
an N x N_z brute-force average into a small linear combination of z-side
functions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Variable
from .smoothers import Curve, spline_fit
from .tree import FunctionTree

PD = "pd"
PA = "pa"
PURE_INTERACTION = "pure_interaction"
CONDITIONAL = "conditional"


@dataclass
class EffectGrid:
    """Evaluation points over a variable subset plus centered effect values.

    ``points`` has one column per subset variable (in subset order); when the
    grid is a Cartesian product the per-variable axes are kept for reshaping.
    ``center`` is the constant subtracted so the effect has zero weighted
    mean over the data distribution of the subset.
    """

    subset: tuple[int, ...]
    names: tuple[str, ...]
    points: np.ndarray
    values: np.ndarray
    kind: str
    center: float = 0.0
    alpha: float | None = None
    eval_count: float = 0.0
    axes: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    @property
    def n_points(self) -> int:
        return len(self.values)

    def grid_values(self) -> np.ndarray:
        """Values reshaped to one axis per subset variable (product grids)."""
        if self.axes is None:
            raise ValueError("effect grid was built from explicit points, not a product grid")
        return self.values.reshape([len(a) for a in self.axes])

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.values**2)))


def write_effect_csv(grid: EffectGrid, path, variables: tuple[Variable, ...] | None = None) -> None:
    """Write an effect grid as CSV with '#' metadata lines (kind, subset,
    centering constant, alpha) followed by one column per variable plus
    ``value``."""
    lut = {}
    if variables is not None:
        for pos, j in enumerate(grid.subset):
            if variables[j].is_categorical:
                lut[pos] = variables[j].levels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# kind: {grid.kind}\n")
        fh.write(f"# subset: {';'.join(grid.names)}\n")
        fh.write(f"# center: {grid.center!r}\n")
        if grid.alpha is not None:
            fh.write(f"# alpha: {grid.alpha!r}\n")
        fh.write(f"# evaluations: {grid.eval_count!r}\n")
        writer = csv.writer(fh)
        writer.writerow(list(grid.names) + ["value"])
        for pt, val in zip(grid.points, grid.values):
            row = [
                lut[pos][int(c)] if pos in lut else repr(float(c))
                for pos, c in enumerate(pt)
            ]
            writer.writerow(row + [repr(float(val))])


# ---------------------------------------------------------------------------
# Evaluation points
# ---------------------------------------------------------------------------

def default_axis(data: Dataset, j: int, resolution: int = 50) -> np.ndarray:
    """Default evaluation values for one variable: every level for
    categoricals, otherwise ``resolution`` equally spaced midpoint quantiles
    ((i - 0.5) / resolution) of the training values, which keeps the grid off
    the extreme order statistics."""
    v = data.variables[j]
    if v.is_categorical:
        return np.arange(v.n_levels, dtype=float)
    probs = (np.arange(resolution) + 0.5) / resolution
    return np.unique(np.quantile(data.X[:, j], probs))


def product_points(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def resolve_points(data: Dataset, subset, points, resolution: int = 50):
    """Normalize a points argument to (points_matrix, axes_or_None).

    ``points`` may be None (default product grid), a list of per-variable
    1-d arrays (product grid), or an explicit (n, |subset|) matrix.
    """
    subset = tuple(subset)
    if points is None:
        axes = tuple(default_axis(data, j, resolution) for j in subset)
        return product_points(axes), axes
    if isinstance(points, (list, tuple)) and len(points) == len(subset):
        axes = tuple(np.asarray(a, dtype=float).ravel() for a in points)
        return product_points(axes), axes
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and len(subset) == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != len(subset):
        raise ValueError("points must have one column per subset variable")
    return pts, None


# ---------------------------------------------------------------------------
# Tree decomposition
# ---------------------------------------------------------------------------

class TreeDecomposition:
    """Split of a tree's bases into z-side and complement-side factors.

    ``terms`` lists every basis touching z as (z_factors, comp_factors) with
    the complement product's data mean precomputed; bases touching no
    z-variable accumulate (with the root constant) into the constant ``abar``.
    ``alpha`` is the fraction of bases involving both sides.
    """

    def __init__(self, tree: FunctionTree, subset, data: Dataset,
                 node_values: list[np.ndarray] | None = None):
        self.tree = tree
        self.subset = tuple(subset)
        if len(set(self.subset)) != len(self.subset) or not self.subset:
            raise ValueError("subset must be a nonempty list of distinct variable indices")
        zset = frozenset(self.subset)
        if not all(0 <= j < len(tree.variables) for j in zset):
            raise ValueError("subset contains an invalid variable index")

        X, w = data.X, data.weight
        if node_values is None:
            node_values = [np.ones(data.n)]
            for node in tree.nodes[1:]:
                node_values.append(node.func(X[:, node.var]))

        self.term_z: list[list[tuple[int, object]]] = []
        self.term_ids: list[int] = []
        self._term_comp: list[list[int]] = []
        mixed = 0
        a_mean = tree.b0
        wsum = float(w.sum())
        for node in tree.nodes[1:]:
            path = tree.path(node.id)
            zfac = [(tree.nodes[m].var, tree.nodes[m].func) for m in path if tree.nodes[m].var in zset]
            comp = [m for m in path if tree.nodes[m].var not in zset]
            if not zfac:
                basis = np.ones(data.n)
                for m in path:
                    basis = basis * node_values[m]
                a_mean += float(np.dot(w, basis)) / wsum
                continue
            self.term_ids.append(node.id)
            self.term_z.append(zfac)
            self._term_comp.append(comp)
            if comp:
                mixed += 1
        self.alpha = mixed / tree.n_nodes if tree.n_nodes else 0.0
        self.abar = a_mean

        # complement-side products at the data rows, and their means
        self._g_rows = np.ones((data.n, len(self.term_ids)))
        for t, comp in enumerate(self._term_comp):
            for m in comp:
                self._g_rows[:, t] *= node_values[m]
        self.gbar = (
            (w @ self._g_rows) / wsum if self.term_ids else np.empty(0)
        )
        self._node_values = node_values
        self._data = data

    @property
    def n_terms(self) -> int:
        return len(self.term_ids)

    def has_mixed(self) -> bool:
        return any(comp for comp in self._term_comp)

    def f_at(self, points: np.ndarray) -> np.ndarray:
        """z-side products evaluated at explicit points (columns in subset
        order); shape (n_points, n_terms)."""
        pos = {j: i for i, j in enumerate(self.subset)}
        out = np.ones((len(points), self.n_terms))
        for t, zfac in enumerate(self.term_z):
            for var, func in zfac:
                out[:, t] *= func(points[:, pos[var]])
        return out

    def f_rows(self, rows: np.ndarray | None = None) -> np.ndarray:
        """z-side products at the data rows (optionally a row subset)."""
        n = self._data.n if rows is None else len(rows)
        out = np.ones((n, self.n_terms))
        for t, (nid, comp) in enumerate(zip(self.term_ids, self._term_comp)):
            compset = set(comp)
            for m in self.tree.path(nid):
                if m not in compset:
                    col = self._node_values[m]
                    out[:, t] *= col if rows is None else col[rows]
        return out

    def g_rows(self, rows: np.ndarray | None = None) -> np.ndarray:
        return self._g_rows if rows is None else self._g_rows[rows]

    def pd_at(self, points: np.ndarray) -> np.ndarray:
        """Uncentered partial dependence at explicit points."""
        if self.n_terms == 0:
            return np.full(len(points), self.abar)
        return self.abar + self.f_at(points) @ self.gbar

    def pd_rows(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Uncentered partial dependence at the data rows' own z-values."""
        if self.n_terms == 0:
            n = self._data.n if rows is None else len(rows)
            return np.full(n, self.abar)
        return self.abar + self.f_rows(rows) @ self.gbar

    def reconstruct(self, rows: np.ndarray | None = None) -> np.ndarray:
        """A + sum f_k * g_k at the data rows; equals the tree prediction."""
        base = self.tree.b0
        out = np.full(self._data.n if rows is None else len(rows), 0.0)
        for node in self.tree.nodes[1:]:
            if node.id not in set(self.term_ids):
                basis = np.ones(self._data.n)
                for m in self.tree.path(node.id):
                    basis = basis * self._node_values[m]
                out += basis if rows is None else basis[rows]
        return base + out + (self.f_rows(rows) * self.g_rows(rows)).sum(axis=1)


def decompose(tree: FunctionTree, subset, data: Dataset,
              node_values: list[np.ndarray] | None = None) -> TreeDecomposition:
    """Express the tree as A + sum_k f_k(z) * g_k(complement) for subset z."""
    return TreeDecomposition(tree, subset, data, node_values)


# ---------------------------------------------------------------------------
# Partial dependence
# ---------------------------------------------------------------------------

def eval_cost(decomp: TreeDecomposition, n: int, n_z: int) -> float:
    """Model evaluations needed for one fast partial dependence: the grid
    itself plus the mixed-basis share of one data pass."""
    return n_z + decomp.alpha * n


def pd_fast(tree: FunctionTree, subset, points=None, data: Dataset | None = None,
            resolution: int = 50) -> EffectGrid:
    """Partial dependence via the tree decomposition, centered to zero
    weighted mean over the data's subset distribution."""
    if data is None:
        raise ValueError("data is required (it defines the averaging distribution)")
    subset = tuple(subset)
    pts, axes = resolve_points(data, subset, points, resolution)
    dec = decompose(tree, subset, data)
    raw = dec.pd_at(pts)
    center = float(np.average(dec.pd_rows(), weights=data.weight))
    return EffectGrid(
        subset=subset,
        names=tuple(data.variables[j].name for j in subset),
        points=pts,
        values=raw - center,
        kind=PD,
        center=center,
        alpha=dec.alpha,
        eval_count=eval_cost(dec, data.n, len(pts)) + data.n,
        axes=axes,
    )


def pd_brute(predict_fn, subset, points=None, data: Dataset | None = None,
             resolution: int = 50, center: str = "rows") -> EffectGrid:
    """Brute-force partial dependence of a black-box row function.

    Every evaluation point is averaged over all data rows with the subset
    columns overwritten (N * N_z function evaluations, tracked in
    ``eval_count``). ``center="rows"`` additionally averages the estimate at
    each row's own subset values to center exactly like the fast path;
    ``center="none"`` skips that (cheaper, uncentered).
    """
    if data is None:
        raise ValueError("data is required")
    subset = tuple(subset)
    pts, axes = resolve_points(data, subset, points, resolution)
    cols = list(subset)

    def averaged(at_points: np.ndarray) -> np.ndarray:
        out = np.empty(len(at_points))
        buf = data.X.copy()
        for i, pt in enumerate(at_points):
            buf[:, cols] = pt
            out[i] = np.average(predict_fn(buf), weights=data.weight)
        return out

    values = averaged(pts)
    evals = float(len(pts)) * data.n
    c = 0.0
    if center == "rows":
        row_pts = data.X[:, cols]
        uniq, inverse = np.unique(row_pts, axis=0, return_inverse=True)
        c = float(np.average(averaged(uniq)[inverse], weights=data.weight))
        evals += float(len(uniq)) * data.n
    elif center != "none":
        raise ValueError("center must be 'rows' or 'none'")
    return EffectGrid(
        subset=subset,
        names=tuple(data.variables[j].name for j in subset),
        points=pts,
        values=values - c,
        kind=PD,
        center=c,
        alpha=None,
        eval_count=evals,
        axes=axes,
    )


# ---------------------------------------------------------------------------
# Partial association
# ---------------------------------------------------------------------------

def coefficient_curve(f_values: np.ndarray, g_values: np.ndarray) -> Curve:
    """Varying-coefficient estimate E[g | f] as a regression spline on f.

    Two guards keep the estimate honest: the spline is only kept when it
    explains significantly more than the plain mean (an F pretest, so the
    coefficient collapses to the constant mean when f and g are unrelated),
    and evaluation is held constant beyond the outermost (5th/95th
    percentile) knots, where the heavy-tailed z-side products leave the
    cubic tails supported by a handful of rows.
    """
    gbar = float(np.mean(g_values))
    curve = spline_fit(f_values, g_values)
    n = len(f_values)
    dof = 4 + 19  # cubic polynomial plus interior knots
    if n > 2 * dof:
        sse_const = float(np.sum((g_values - gbar) ** 2))
        sse_spline = float(np.sum((g_values - curve(f_values)) ** 2))
        if sse_spline <= 0.0:
            return curve
        f_stat = ((sse_const - sse_spline) / (dof - 1)) / (sse_spline / (n - dof))
        if f_stat < 3.0:
            return Curve(np.array([0.0]), np.array([gbar]))
    qlo, qhi = np.quantile(f_values, [0.05, 0.95])
    if qhi > qlo:
        grid = np.linspace(qlo, qhi, 801)
        return Curve(grid, curve(grid))
    return curve


def pa(tree: FunctionTree, subset, points=None, data: Dataset | None = None,
       resolution: int = 50) -> EffectGrid:
    """Partial association: like partial dependence but each complement mean
    is replaced by a varying coefficient estimated as a regression-spline fit
    of the complement product on the z-side product. Reduces to partial
    dependence exactly when no basis mixes z with its complement."""
    if data is None:
        raise ValueError("data is required")
    subset = tuple(subset)
    if len(subset) > 2:
        raise ValueError("partial association is limited to subsets of size <= 2")
    pts, axes = resolve_points(data, subset, points, resolution)
    dec = decompose(tree, subset, data)

    f_rows = dec.f_rows()
    g_rows = dec.g_rows()
    coeffs: list[Curve | None] = []
    for t in range(dec.n_terms):
        fr = f_rows[:, t]
        is_mixed = bool(dec._term_comp[t])
        degenerate = float(np.ptp(fr)) <= 1e-12 * max(1.0, float(np.abs(fr).max()))
        if not is_mixed:
            coeffs.append(None)  # complement product is identically 1
        elif degenerate or data.n < 30:
            coeffs.append(Curve(np.array([0.0]), np.array([dec.gbar[t]])))
        else:
            coeffs.append(coefficient_curve(fr, g_rows[:, t]))

    def pa_values(fvals: np.ndarray) -> np.ndarray:
        out = np.full(fvals.shape[0], dec.abar)
        for t, h in enumerate(coeffs):
            ft = fvals[:, t]
            out += ft if h is None else ft * h(ft)
        return out

    raw = pa_values(dec.f_at(pts))
    center = float(np.average(pa_values(f_rows), weights=data.weight))
    return EffectGrid(
        subset=subset,
        names=tuple(data.variables[j].name for j in subset),
        points=pts,
        values=raw - center,
        kind=PA,
        center=center,
        alpha=dec.alpha,
        eval_count=eval_cost(dec, data.n, len(pts)) + data.n,
        axes=axes,
    )
