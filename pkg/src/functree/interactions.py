"""Pure-interaction effects, strength ranking, screening, and bootstrap
comparison of constrained refits.

The pure interaction of a variable subset is its partial dependence with all
lower-order sub-effects recursively removed; its strength is the standard
deviation of that component over the data relative to the standard deviation
of the model predictions. An EffectEngine memoizes the subset lattice so a
search over many subsets shares every sub-computation.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .data import Dataset, rmse, take_rows
from .pdengine import (
    CONDITIONAL,
    PURE_INTERACTION,
    EffectGrid,
    coefficient_curve,
    pd_brute,
    resolve_points,
)
from .smoothers import Curve, LevelTable
from .tree import FitConfig, FunctionTree, TreeFitter, difference

__all__ = [
    "EffectEngine",
    "EffectEntry",
    "EffectReport",
    "ScreenH",
    "ScreenR",
    "bootstrap_compare",
    "conditional_interaction",
    "model_diff",
    "pin",
    "pure_interaction",
    "pure_interaction_brute",
    "screen_h",
    "screen_r",
    "search_effects",
    "strength",
]


def _proper_subsets(s: tuple) -> list[tuple]:
    out: list[tuple] = []
    for size in range(1, len(s)):
        out.extend(combinations(s, size))
    return out


class _Term:
    """One basis function split against a subset: path nodes inside the
    subset, path nodes outside it, and the data mean of the outside product."""

    __slots__ = ("node_id", "z_nodes", "comp_nodes", "gbar", "inside")

    def __init__(self, node_id, z_nodes, comp_nodes, gbar, inside):
        self.node_id = node_id
        self.z_nodes = z_nodes
        self.comp_nodes = comp_nodes
        self.gbar = gbar
        self.inside = inside


class _Split:
    __slots__ = ("abar", "terms", "alpha", "n_mixed")

    def __init__(self, abar, terms, alpha, n_mixed):
        self.abar = abar
        self.terms = terms
        self.alpha = alpha
        self.n_mixed = n_mixed


class EffectEngine:
    """Shared caches for subset-effect computation on one (tree, data) pair.

    Strengths are evaluated at the data rows' own subset values (optionally a
    seeded row subsample via ``rows``); grids reuse the same centering
    constants. ``use_pa`` swaps the fixed complement means for partial
    association coefficient functions. ``fast_evals`` accumulates the
    decomposition-path evaluation cost per computed effect; ``brute_equiv``
    the matching brute-force cost.
    """

    def __init__(self, tree: FunctionTree, data: Dataset, *, rows: np.ndarray | None = None,
                 use_pa: bool = False):
        self.tree = tree
        self.data = data
        self.use_pa = use_pa
        n = data.n
        k = len(tree.nodes)
        self.node_values = np.ones((n, k))
        self.basis = np.ones((n, k))
        for node in tree.nodes[1:]:
            self.node_values[:, node.id] = node.func(data.X[:, node.var])
            self.basis[:, node.id] = self.basis[:, node.parent] * self.node_values[:, node.id]
        wsum = float(data.weight.sum())
        self.basis_mean = (data.weight @ self.basis) / wsum
        self.paths = [tree.path(m) for m in range(1, k)]
        self.pathvars = [frozenset(tree.nodes[i].var for i in p) for p in self.paths]
        self.pred_full = tree.b0 + self.basis[:, 1:].sum(axis=1)

        self.rows = np.arange(n) if rows is None else np.asarray(rows)
        self.w = data.weight[self.rows]
        self.pred = self.pred_full[self.rows]
        self._splits: dict[frozenset, _Split] = {}
        self._centers: dict[frozenset, float] = {}
        self._rows_centered: dict[frozenset, np.ndarray] = {}
        self._i_rows: dict[frozenset, np.ndarray] = {}
        self._pa_coeffs: dict[frozenset, list] = {}
        self.fast_evals = 0.0
        self.brute_equiv = 0.0

    # -- decomposition against a subset -------------------------------------

    def split(self, key: frozenset) -> _Split:
        cached = self._splits.get(key)
        if cached is not None:
            return cached
        abar = self.tree.b0
        terms = []
        n_mixed = 0
        for idx, pv in enumerate(self.pathvars):
            node_id = idx + 1
            if not (pv & key):
                abar += float(self.basis_mean[node_id])
                continue
            path = self.paths[idx]
            z_nodes = [m for m in path if self.tree.nodes[m].var in key]
            comp_nodes = [m for m in path if self.tree.nodes[m].var not in key]
            inside = not comp_nodes
            if inside:
                gbar = 1.0
            else:
                n_mixed += 1
                comp = self.node_values[:, comp_nodes[0]].copy()
                for m in comp_nodes[1:]:
                    comp *= self.node_values[:, m]
                gbar = float(np.average(comp, weights=self.data.weight))
            terms.append(_Term(node_id, z_nodes, comp_nodes, gbar, inside))
        total = len(self.pathvars)
        out = _Split(abar, terms, n_mixed / total if total else 0.0, n_mixed)
        self._splits[key] = out
        return out

    def _term_f_rows(self, term: _Term) -> np.ndarray:
        if term.inside:
            return self.basis[self.rows, term.node_id]
        out = self.node_values[self.rows, term.z_nodes[0]].copy()
        for m in term.z_nodes[1:]:
            out *= self.node_values[self.rows, m]
        return out

    def _term_f_at(self, term: _Term, subset: tuple, pts: np.ndarray) -> np.ndarray:
        pos = {j: i for i, j in enumerate(subset)}
        out = np.ones(len(pts))
        for m in term.z_nodes:
            node = self.tree.nodes[m]
            out *= node.func(pts[:, pos[node.var]])
        return out

    def _coeffs(self, key: frozenset) -> list:
        """Partial-association coefficient function per term (None for a
        fixed mean); fitted on the full data rows."""
        cached = self._pa_coeffs.get(key)
        if cached is not None:
            return cached
        split = self.split(key)
        coeffs = []
        for term in split.terms:
            if term.inside:
                coeffs.append(None)
            else:
                fr = self.node_values[:, term.z_nodes[0]].copy()
                for m in term.z_nodes[1:]:
                    fr *= self.node_values[:, m]
                if float(np.ptp(fr)) <= 1e-12 * max(1.0, float(np.abs(fr).max())) or self.data.n < 30:
                    coeffs.append(Curve(np.array([0.0]), np.array([term.gbar])))
                else:
                    gr = np.ones(self.data.n)
                    for m in term.comp_nodes:
                        gr *= self.node_values[:, m]
                    coeffs.append(coefficient_curve(fr, gr))
        self._pa_coeffs[key] = coeffs
        return coeffs

    # -- effect values -------------------------------------------------------

    def _account(self, n_points: int, split: _Split) -> None:
        self.fast_evals += n_points + split.alpha * self.data.n
        self.brute_equiv += float(n_points) * self.data.n

    def effect_rows_raw(self, key: frozenset) -> np.ndarray:
        split = self.split(key)
        out = np.full(len(self.rows), split.abar)
        coeffs = self._coeffs(key) if self.use_pa else None
        for t, term in enumerate(split.terms):
            fr = self._term_f_rows(term)
            if coeffs is None or coeffs[t] is None:
                out += term.gbar * fr
            else:
                out += fr * coeffs[t](fr)
        return out

    def center(self, key: frozenset) -> float:
        if key not in self._centers:
            self.rows_centered(key)
        return self._centers[key]

    def rows_centered(self, key: frozenset) -> np.ndarray:
        cached = self._rows_centered.get(key)
        if cached is None:
            raw = self.effect_rows_raw(key)
            c = float(np.average(raw, weights=self.w))
            cached = raw - c
            self._centers[key] = c
            self._rows_centered[key] = cached
            self._account(len(self.rows), self.split(key))
        return cached

    def effect_at(self, subset: tuple, pts: np.ndarray) -> np.ndarray:
        """Centered effect (PD or PA) at explicit points; columns follow the
        given subset order."""
        key = frozenset(subset)
        split = self.split(key)
        out = np.full(len(pts), split.abar)
        coeffs = self._coeffs(key) if self.use_pa else None
        for t, term in enumerate(split.terms):
            fv = self._term_f_at(term, subset, pts)
            if coeffs is None or coeffs[t] is None:
                out += term.gbar * fv
            else:
                out += fv * coeffs[t](fv)
        self._account(len(pts), split)
        return out - self.center(key)

    def i_rows(self, key: frozenset) -> np.ndarray:
        cached = self._i_rows.get(key)
        if cached is None:
            vals = self.rows_centered(key).copy()
            for size in range(1, len(key)):
                for u in combinations(sorted(key), size):
                    vals -= self.i_rows(frozenset(u))
            cached = vals
            self._i_rows[key] = cached
        return cached

    def i_at(self, subset: tuple, pts: np.ndarray, _memo: dict | None = None) -> np.ndarray:
        memo = {} if _memo is None else _memo
        key = tuple(subset)
        cached = memo.get(key)
        if cached is not None:
            return cached
        vals = self.effect_at(subset, pts)
        for u in _proper_subsets(subset):
            cols = [subset.index(v) for v in u]
            vals = vals - self.i_at(u, pts[:, cols], memo)
        memo[key] = vals
        return vals

    def strength(self, subset) -> float:
        key = frozenset(subset)
        pv = float(np.average((self.pred - np.average(self.pred, weights=self.w)) ** 2, weights=self.w))
        if pv <= 0.0:
            raise ValueError("model predictions are constant; strength is undefined")
        iv = self.i_rows(key)
        return float(np.sqrt(np.average(iv**2, weights=self.w) / pv))


# ---------------------------------------------------------------------------
# Public effect operations
# ---------------------------------------------------------------------------

def _check_subset(tree: FunctionTree, s) -> tuple[int, ...]:
    s = tuple(s)
    if not 1 <= len(s) <= 4 or len(set(s)) != len(s):
        raise ValueError("subset must hold 1 to 4 distinct variables")
    if not all(0 <= j < len(tree.variables) for j in s):
        raise ValueError("subset contains an invalid variable index")
    return s


def pure_interaction(tree: FunctionTree, s, points=None, data: Dataset | None = None,
                     resolution: int = 50, engine: EffectEngine | None = None,
                     kind: str = PURE_INTERACTION) -> EffectGrid:
    """Partial dependence of the subset with all lower-order sub-effects
    recursively subtracted; identically zero when the model has no
    interaction among the subset's variables."""
    if data is None:
        raise ValueError("data is required")
    s = _check_subset(tree, s)
    eng = engine or EffectEngine(tree, data)
    pts, axes = resolve_points(data, s, points, resolution)
    before = eng.fast_evals
    values = eng.i_at(s, pts)
    return EffectGrid(
        subset=s,
        names=tuple(data.variables[j].name for j in s),
        points=pts,
        values=values,
        kind=kind,
        center=eng.center(frozenset(s)),
        alpha=eng.split(frozenset(s)).alpha,
        eval_count=eng.fast_evals - before,
        axes=axes,
    )


def strength(tree: FunctionTree, s, data: Dataset, engine: EffectEngine | None = None) -> float:
    """Interaction strength: sd of the pure interaction over the data rows
    divided by the sd of the model predictions."""
    s = _check_subset(tree, s)
    eng = engine or EffectEngine(tree, data)
    return eng.strength(s)


def pin(tree: FunctionTree, cond: dict[int, float]) -> FunctionTree:
    """A tree with the given variables held at fixed values: every node on a
    pinned variable keeps its slot but its function becomes the constant it
    takes at the pinned value."""
    nodes = [replace(tree.nodes[0])]
    for node in tree.nodes[1:]:
        if node.var in cond:
            const = float(node.func(cond[node.var]))
            if isinstance(node.func, LevelTable):
                func = LevelTable(np.array([const]), const)
            else:
                func = Curve(np.array([0.0]), np.array([const]))
            nodes.append(replace(node, func=func))
        else:
            nodes.append(replace(node))
    return FunctionTree(tree.variables, tree.b0, nodes)


def conditional_interaction(tree: FunctionTree, s, cond, points=None,
                            data: Dataset | None = None, resolution: int = 50,
                            method: str = "fast") -> EffectGrid:
    """Pure interaction of the subset with other variables pinned to fixed
    values. The pinned model is still a function tree, so the fast path gives
    exactly what brute-force averaging of the restricted predictor gives.
    """
    if data is None:
        raise ValueError("data is required")
    s = _check_subset(tree, s)
    cond_map = {int(v): float(val) for v, val in (cond.items() if isinstance(cond, dict) else cond)}
    if set(cond_map) & set(s):
        raise ValueError("conditioning variables must be disjoint from the subset")
    for j, val in cond_map.items():
        var = tree.variables[j]
        rng = var.observed_range
        if rng is not None and not rng[0] <= val <= rng[1]:
            warnings.warn(
                f"{var.name}: pinned value {val} lies outside the observed range; "
                "constant extrapolation applies", stacklevel=2,
            )
    if method == "fast":
        grid = pure_interaction(pin(tree, cond_map), s, points, data, resolution, kind=CONDITIONAL)
        return grid
    if method != "brute":
        raise ValueError("method must be 'fast' or 'brute'")

    def restricted(X: np.ndarray) -> np.ndarray:
        Xm = np.array(X, dtype=float, copy=True)
        for j, val in cond_map.items():
            Xm[:, j] = val
        return tree.predict(Xm)

    grid = pure_interaction_brute(restricted, s, points, data, resolution)
    grid.kind = CONDITIONAL
    return grid


def pure_interaction_brute(predict_fn, s, points=None, data: Dataset | None = None,
                           resolution: int = 50) -> EffectGrid:
    """Pure interaction of a black-box predictor via brute-force partial
    dependences (reference path: N * N_z evaluations per subset)."""
    if data is None:
        raise ValueError("data is required")
    s = tuple(s)
    pts, axes = resolve_points(data, s, points, resolution)
    evals = 0.0

    memo: dict[tuple, np.ndarray] = {}

    def i_values(subset: tuple, p: np.ndarray) -> np.ndarray:
        nonlocal evals
        key = tuple(subset)
        if key in memo:
            return memo[key]
        uniq, inverse = np.unique(p, axis=0, return_inverse=True)
        grid = pd_brute(predict_fn, subset, uniq, data, center="rows")
        evals += grid.eval_count
        vals = grid.values[inverse]
        for u in _proper_subsets(subset):
            cols = [subset.index(v) for v in u]
            vals = vals - i_values(u, p[:, cols])
        memo[key] = vals
        return vals

    values = i_values(s, pts)
    return EffectGrid(
        subset=s,
        names=tuple(data.variables[j].name for j in s),
        points=pts,
        values=values,
        kind=PURE_INTERACTION,
        center=0.0,
        alpha=None,
        eval_count=evals,
        axes=axes,
    )


def model_diff(a: FunctionTree, b: FunctionTree) -> FunctionTree:
    """Model computing a - b (a function tree itself, so every fast effect
    tool applies to the difference)."""
    return difference(a, b)


# ---------------------------------------------------------------------------
# Screening
# ---------------------------------------------------------------------------

@dataclass
class ScreenH:
    """Per-variable interaction scores from the two-sided partial-dependence
    residual; variables below the threshold are treated as non-interacting."""

    scores: np.ndarray
    threshold: float
    flagged: tuple[int, ...]


def screen_h(tree: FunctionTree, data: Dataset, threshold_factor: float = 0.05,
             engine: EffectEngine | None = None) -> ScreenH:
    """Score sqrt(E[(F - PD(x_j) - PD(rest))^2]) per variable; zero exactly
    when the variable appears in no mixed-path basis."""
    eng = engine or EffectEngine(tree, data)
    p = data.p
    pred_c = eng.pred - np.average(eng.pred, weights=eng.w)
    all_vars = frozenset(range(p))
    scores = np.zeros(p)
    for j in range(p):
        pd_j = eng.rows_centered(frozenset([j]))
        comp = all_vars - {j}
        pd_c = eng.rows_centered(comp) if comp else 0.0
        resid = pred_c - pd_j - pd_c
        scores[j] = float(np.sqrt(np.average(resid**2, weights=eng.w)))
    sd_pred = float(np.sqrt(np.average(pred_c**2, weights=eng.w)))
    threshold = threshold_factor * sd_pred
    flagged = tuple(int(j) for j in range(p) if scores[j] >= threshold)
    return ScreenH(scores, threshold, flagged)


@dataclass
class ScreenR:
    """Influence mass of each variable at each interaction level: the sum of
    basis standard deviations over nodes whose paths contain the variable at
    that exact interaction order."""

    matrix: np.ndarray
    threshold: float

    def included(self, level: int) -> tuple[int, ...]:
        """Variables with substantial mass at ``level`` or any higher level."""
        if level >= self.matrix.shape[1]:
            return ()
        tail = self.matrix[:, level:].max(axis=1)
        return tuple(int(j) for j in range(len(tail)) if tail[j] > 0 and tail[j] >= self.threshold)


def screen_r(tree: FunctionTree, data: Dataset | None = None,
             threshold_factor: float = 0.05) -> ScreenR:
    """Per-(variable, level) influence mass from the stored node influences,
    recomputed from ``data`` when any influence is missing. The inclusion
    threshold is relative to the largest entry over all variables and levels."""
    if any(np.isnan(n.influence) for n in tree.nodes[1:]):
        if data is None:
            raise ValueError("tree has no stored influences; pass data to recompute")
        tree.recompute_influence(data.X, data.weight)
    p = len(tree.variables)
    max_level = max(tree.max_interaction_order(), 1)
    R = np.zeros((p, max_level + 1))
    for node in tree.nodes[1:]:
        order = tree.interaction_order(node.id)
        for j in tree.path_vars(node.id):
            R[j, order] += node.influence
    return ScreenR(R, threshold_factor * float(R.max(initial=0.0)))


# ---------------------------------------------------------------------------
# Effect search
# ---------------------------------------------------------------------------

@dataclass
class EffectEntry:
    subset: tuple[int, ...]
    names: tuple[str, ...]
    order: int
    strength: float
    strength_pa: float | None = None


@dataclass
class EffectReport:
    """Ranked effect entries (descending strength within order) plus the
    screening provenance and the evaluation-cost accounting of the search."""

    entries: list[EffectEntry]
    screening: dict | None
    fast_evals: float
    brute_equiv: float

    def top(self, order: int | None = None, k: int = 10) -> list[EffectEntry]:
        pool = [e for e in self.entries if order is None or e.order == order]
        return pool[:k] if order is not None else sorted(pool, key=lambda e: -e.strength)[:k]

    def entry(self, subset) -> EffectEntry | None:
        key = frozenset(subset)
        for e in self.entries:
            if frozenset(e.subset) == key:
                return e
        return None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["subset", "order", "strength"]
            if any(e.strength_pa is not None for e in self.entries):
                header.append("strength_pa")
            writer.writerow(header)
            for e in self.entries:
                row = [";".join(e.names), e.order, repr(e.strength)]
                if len(header) == 4:
                    row.append("" if e.strength_pa is None else repr(e.strength_pa))
                writer.writerow(row)

    def screening_text(self, names: tuple[str, ...] | None = None) -> str:
        if self.screening is None:
            return "screening disabled\n"
        h: ScreenH = self.screening["h"]
        r: ScreenR = self.screening["r"]
        pools: dict[int, tuple[int, ...]] = self.screening["pools"]
        label = (lambda j: names[j]) if names else str
        lines = [f"h-screen threshold: {h.threshold:.6g}"]
        lines.append("h-scores: " + ", ".join(f"{label(j)}={h.scores[j]:.4g}" for j in range(len(h.scores))))
        lines.append("interacting variables: " + (", ".join(label(j) for j in h.flagged) or "(none)"))
        lines.append(f"r-screen threshold: {r.threshold:.6g}")
        for level in range(1, r.matrix.shape[1]):
            row = ", ".join(
                f"{label(j)}={r.matrix[j, level]:.4g}" for j in range(r.matrix.shape[0])
                if r.matrix[j, level] > 0
            )
            lines.append(f"r level {level}: {row or '(none)'}")
        for order, pool in sorted(pools.items()):
            lines.append(f"order-{order} search pool: " + (", ".join(label(j) for j in pool) or "(none)"))
        return "\n".join(lines) + "\n"


def search_effects(tree: FunctionTree, data: Dataset, max_order: int = 3,
                   use_screens: bool = True, with_pa: bool = False,
                   h_factor: float = 0.05, r_factor: float = 0.05,
                   strength_rows: int | None = None, seed: int = 0) -> EffectReport:
    """Enumerate variable subsets up to ``max_order`` (at most 4), rank them
    by interaction strength, and report the screening path.

    With screening on, main effects are searched over variables carrying any
    influence mass, and order-n subsets over the interacting variables that
    also carry mass at level n or higher. ``strength_rows`` caps the number
    of rows used for the strength variance (seeded subsample).
    """
    max_order = min(max_order, 4)
    if max_order < 1:
        raise ValueError("max_order must be between 1 and 4")
    rows = None
    if strength_rows is not None and strength_rows < data.n:
        rows = np.sort(np.random.default_rng(seed).choice(data.n, strength_rows, replace=False))
    eng = EffectEngine(tree, data, rows=rows)
    eng_pa = EffectEngine(tree, data, rows=rows, use_pa=True) if with_pa else None

    screening = None
    if use_screens:
        hres = screen_h(tree, data, h_factor)
        rres = screen_r(tree, data, threshold_factor=r_factor)
        pools = {1: rres.included(1)}
        for order in range(2, max_order + 1):
            pools[order] = tuple(sorted(set(hres.flagged) & set(rres.included(order))))
        screening = {"h": hres, "r": rres, "pools": pools}
    else:
        pools = {order: tuple(range(data.p)) for order in range(1, max_order + 1)}

    entries: list[EffectEntry] = []
    for order in range(1, max_order + 1):
        batch = []
        for s in combinations(pools[order], order):
            st = eng.strength(s)
            st_pa = eng_pa.strength(s) if eng_pa is not None else None
            batch.append(EffectEntry(s, tuple(data.variables[j].name for j in s), order, st, st_pa))
        batch.sort(key=lambda e: -e.strength)
        entries.extend(batch)
    return EffectReport(entries, screening, eng.fast_evals, eng.brute_equiv)


# ---------------------------------------------------------------------------
# Bootstrap comparison
# ---------------------------------------------------------------------------

@dataclass
class BootstrapResult:
    """Out-of-bootstrap test-error distributions, one row per configuration."""

    labels: list[str]
    test_rmse: np.ndarray

    def quantiles(self, qs=(0.25, 0.5, 0.75)) -> np.ndarray:
        return np.quantile(self.test_rmse, qs, axis=1).T

    def medians(self) -> np.ndarray:
        return np.median(self.test_rmse, axis=1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["config", "replicate", "test_rmse"])
            for label, row in zip(self.labels, self.test_rmse):
                for rep, val in enumerate(row):
                    writer.writerow([label, rep, repr(float(val))])


def bootstrap_compare(data: Dataset, configs: list[FitConfig], reps: int, seed: int = 0,
                      labels: list[str] | None = None) -> BootstrapResult:
    """Fit every configuration on shared bootstrap resamples and score each
    on the rows left out of that resample; identical configurations produce
    identical distributions under the shared replicate seeds."""
    if reps < 2:
        raise ValueError("need at least 2 replicates")
    if labels is None:
        labels = [f"config{i}" for i in range(len(configs))]
    out = np.empty((len(configs), reps))
    seeds = np.random.SeedSequence(seed).spawn(reps)
    for rep in range(reps):
        rng = np.random.default_rng(seeds[rep])
        idx = rng.integers(0, data.n, size=data.n)
        oob = np.setdiff1d(np.arange(data.n), np.unique(idx))
        if len(oob) < 2:
            idx = rng.integers(0, data.n, size=data.n)
            oob = np.setdiff1d(np.arange(data.n), np.unique(idx))
        boot = take_rows(data, idx)
        held = take_rows(data, oob)
        for c, config in enumerate(configs):
            fitter = TreeFitter(boot, config)
            model = fitter.run()
            out[c, rep] = rmse(held.y, model.predict(held.X), held.weight)
    return BootstrapResult(list(labels), out)
