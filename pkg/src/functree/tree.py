"""Function-tree models.

A function tree is a rooted tree whose non-root nodes each hold a univariate
function of one predictor. Every node contributes a basis function equal to
the product of the functions along its path to the root; the model is the
root constant plus the sum of all basis functions. Trees are grown in a
forward stepwise best-first manner, with optional backfitting passes that
re-estimate existing node functions after each addition.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (
    CATEGORICAL,
    NUMERIC,
    Dataset,
    SplitSpec,
    Variable,
    rmse,
    split_indices,
)
from .smoothers import (
    CATEGORICAL_MEAN,
    LOCAL_LINEAR,
    Curve,
    LevelTable,
    SmootherSpec,
    UnivariateFunction,
    combine,
    smooth,
    thin_knots,
)

FORMAT_VERSION = 1

ROOT = 0


class SchemaMismatchError(ValueError):
    """Model and data disagree on the variable schema."""


class FormatVersionError(ValueError):
    """Model file carries an unsupported format version."""


@dataclass
class TreeNode:
    """One tree node: a univariate function of one predictor, plus the
    standard deviation of its basis function over the training data."""

    id: int
    parent: int
    var: int | None
    func: UnivariateFunction | None
    influence: float = float("nan")


@dataclass
class FunctionTree:
    """Fitted model: root constant plus path-product basis functions."""

    variables: tuple[Variable, ...]
    b0: float
    nodes: list[TreeNode]
    train_stats: dict | None = None
    fit_history: list[dict] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not self.nodes or self.nodes[0].id != ROOT or self.nodes[0].var is not None:
            raise ValueError("nodes[0] must be the bare root")
        for k, node in enumerate(self.nodes):
            if node.id != k:
                raise ValueError("node ids must be consecutive")
            if k > 0 and not 0 <= node.parent < k:
                raise ValueError("parent id must precede the node (topological order)")

    # -- structure ---------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        """Number of non-root nodes."""
        return len(self.nodes) - 1

    def path(self, node_id: int) -> list[int]:
        """Node ids from ``node_id`` up to (excluding) the root."""
        if not 0 < node_id < len(self.nodes):
            raise ValueError(f"invalid node id {node_id}")
        out = []
        k = node_id
        while k != ROOT:
            out.append(k)
            k = self.nodes[k].parent
        return out

    def path_vars(self, node_id: int) -> frozenset[int]:
        return frozenset(self.nodes[k].var for k in self.path(node_id))

    def interaction_order(self, node_id: int) -> int:
        """Count of distinct variables on the node's root path; repeats of a
        variable along one path do not raise the order."""
        return len(self.path_vars(node_id))

    def children_map(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {k: [] for k in range(len(self.nodes))}
        for node in self.nodes[1:]:
            out[node.parent].append(node.id)
        return out

    def max_interaction_order(self) -> int:
        return max((self.interaction_order(k) for k in range(1, len(self.nodes))), default=0)

    # -- evaluation --------------------------------------------------------

    def _check_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.variables):
            raise SchemaMismatchError(
                f"expected {len(self.variables)} columns, got {X.shape[1]}"
            )
        return X

    def basis_values(self, X: np.ndarray) -> np.ndarray:
        """N x K matrix of basis-function values, one column per non-root
        node in id order. Row sums plus b0 equal predict()."""
        X = self._check_matrix(X)
        cols = np.empty((X.shape[0], len(self.nodes)))
        cols[:, 0] = 1.0
        for node in self.nodes[1:]:
            cols[:, node.id] = cols[:, node.parent] * node.func(X[:, node.var])
        return cols[:, 1:]

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Model value b0 + sum of path products, vectorized over rows."""
        X = self._check_matrix(X)
        if len(self.nodes) == 1:
            return np.full(X.shape[0], self.b0)
        return self.b0 + self.basis_values(X).sum(axis=1)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.predict(X)

    def check_schema(self, variables: tuple[Variable, ...]) -> None:
        ours = [(v.name, v.kind, v.levels) for v in self.variables]
        theirs = [(v.name, v.kind, v.levels) for v in variables]
        if ours != theirs:
            raise SchemaMismatchError("variable schema does not match the model")

    def copy(self) -> "FunctionTree":
        return FunctionTree(
            self.variables,
            self.b0,
            [replace(n) for n in self.nodes],
            None if self.train_stats is None else dict(self.train_stats),
        )

    def recompute_influence(self, X: np.ndarray, weight: np.ndarray | None = None) -> None:
        B = self.basis_values(X)
        w = np.ones(B.shape[0]) if weight is None else np.asarray(weight, dtype=float)
        mean = np.average(B, axis=0, weights=w)
        var = np.average((B - mean) ** 2, axis=0, weights=w)
        for node in self.nodes[1:]:
            node.influence = float(np.sqrt(var[node.id - 1]))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        variables = []
        for v in self.variables:
            entry: dict = {"name": v.name, "kind": v.kind}
            if v.is_categorical:
                entry["levels"] = list(v.levels)
            elif v.observed_range is not None:
                entry["range"] = [v.observed_range[0], v.observed_range[1]]
            variables.append(entry)
        nodes = []
        for n in self.nodes[1:]:
            entry = {"id": n.id, "parent": n.parent, "var": n.var}
            if isinstance(n.func, LevelTable):
                entry["kind"] = "levels"
                entry["values"] = n.func.values.tolist()
                entry["default"] = n.func.default
            else:
                entry["kind"] = "curve"
                entry["knots"] = n.func.knots.tolist()
                entry["values"] = n.func.values.tolist()
            entry["influence"] = None if np.isnan(n.influence) else n.influence
            nodes.append(entry)
        out = {"format_version": FORMAT_VERSION, "b0": self.b0, "variables": variables, "nodes": nodes}
        if self.train_stats is not None:
            out["train_stats"] = self.train_stats
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "FunctionTree":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise FormatVersionError(f"unsupported model format version {version!r}")
        variables = []
        for entry in doc["variables"]:
            if entry["kind"] == CATEGORICAL:
                variables.append(Variable(entry["name"], CATEGORICAL, levels=tuple(entry["levels"])))
            else:
                rng = entry.get("range")
                variables.append(
                    Variable(entry["name"], NUMERIC, observed_range=None if rng is None else (rng[0], rng[1]))
                )
        nodes = [TreeNode(ROOT, -1, None, None)]
        for entry in doc["nodes"]:
            if entry["kind"] == "levels":
                func: UnivariateFunction = LevelTable(np.array(entry["values"]), entry["default"])
            elif entry["kind"] == "curve":
                func = Curve(np.array(entry["knots"]), np.array(entry["values"]))
            else:
                raise ValueError(f"unknown node kind {entry['kind']!r}")
            infl = entry.get("influence")
            nodes.append(
                TreeNode(entry["id"], entry["parent"], entry["var"], func,
                         float("nan") if infl is None else float(infl))
            )
        return cls(tuple(variables), float(doc["b0"]), nodes, doc.get("train_stats"))


def save(tree: FunctionTree, path) -> None:
    """Write a tree as a versioned JSON document."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree.to_dict(), fh)
        fh.write("\n")


def load(path) -> FunctionTree:
    """Read a tree written by save(); rejects unknown format versions."""
    with open(path, encoding="utf-8") as fh:
        return FunctionTree.from_dict(json.load(fh))


def difference(a: FunctionTree, b: FunctionTree) -> FunctionTree:
    """A tree computing a.predict(x) - b.predict(x).

    Both forests are merged under one root with the sign flip folded into the
    depth-1 functions of ``b``; basis influences are unchanged by the flip.
    """
    a.check_schema(b.variables)
    nodes = [TreeNode(ROOT, -1, None, None)]
    for src, sign in ((a, 1.0), (b, -1.0)):
        offset = len(nodes) - 1
        for n in src.nodes[1:]:
            parent = ROOT if n.parent == ROOT else n.parent + offset
            func = n.func.scale(sign) if sign < 0 and n.parent == ROOT else n.func
            nodes.append(TreeNode(len(nodes), parent, n.var, func, n.influence))
    return FunctionTree(a.variables, a.b0 - b.b0, nodes)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    """Tree construction controls.

    ``max_order`` bounds each node's interaction order (0 = unlimited, 1 =
    additive only); ``forbidden_subsets`` lists variable-index sets no single
    path may contain. ``patience`` is the number of consecutive additions
    without test-error improvement tolerated before stopping; the returned
    tree is the snapshot at the best test error.
    """

    max_nodes: int = 200
    max_order: int = 0
    forbidden_subsets: tuple[frozenset[int], ...] = ()
    numeric_smoother: SmootherSpec = SmootherSpec(LOCAL_LINEAR, span=0.15)
    categorical_smoother: SmootherSpec = SmootherSpec(CATEGORICAL_MEAN)
    split: SplitSpec = SplitSpec()
    backfit_passes: int = 2
    patience: int = 5

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.max_order < 0 or self.backfit_passes < 0 or self.patience < 0:
            raise ValueError("max_order, backfit_passes, patience must be >= 0")
        if self.numeric_smoother.method == CATEGORICAL_MEAN:
            raise ValueError("numeric smoother must be near_neighbor or local_linear")
        if self.categorical_smoother.method != CATEGORICAL_MEAN:
            raise ValueError("categorical smoother must be categorical_mean")
        object.__setattr__(
            self, "forbidden_subsets", tuple(frozenset(s) for s in self.forbidden_subsets)
        )


class _ColumnEval:
    """Prepared evaluation of node functions at one fixed data column.

    Numeric columns pre-resolve interpolation indices against the shared
    per-variable knot grid, so evaluating an on-grid curve is three vector
    ops; curves on other knots fall back to direct interpolation.
    """

    def __init__(self, col: np.ndarray, knots: np.ndarray | None):
        self.col = col
        self.n = len(col)
        self.knots = knots
        if knots is None:
            self.idx = np.rint(col).astype(int) if self.n else np.empty(0, dtype=int)
        elif len(knots) == 1:
            self.i0 = None
        else:
            i = np.clip(np.searchsorted(knots, col, side="right") - 1, 0, len(knots) - 2)
            gap = knots[i + 1] - knots[i]
            self.i0 = i
            self.i1 = i + 1
            self.frac = np.clip((col - knots[i]) / gap, 0.0, 1.0)

    def apply(self, func: UnivariateFunction) -> np.ndarray:
        if self.n == 0:
            return np.empty(0)
        if self.knots is None:
            vals = func.values
            if self.idx.max(initial=-1) < len(vals):
                return vals[self.idx]
            ok = self.idx < len(vals)
            return np.where(ok, vals[np.minimum(self.idx, len(vals) - 1)], func.default)
        if func.knots is not self.knots and not (
            len(func.knots) == len(self.knots) and np.array_equal(func.knots, self.knots)
        ):
            return func(self.col)
        if self.i0 is None:
            return np.full(self.n, func.values[0])
        v = func.values
        return v[self.i0] * (1.0 - self.frac) + v[self.i1] * self.frac


class TreeFitter:
    """Stateful forward-stepwise fitter; ``fit()`` is the public entry point.

    State kept per step: node list, per-node function values on the train and
    test partitions, per-node basis columns, and the training residual. All
    updates are line-searched, so training squared error never increases.
    """

    def __init__(self, data: Dataset, config: FitConfig, *, tree: FunctionTree | None = None,
                 split: bool = True):
        self.data = data
        self.config = config
        if split:
            tr, te = split_indices(data.n, config.split)
        else:
            tr, te = np.arange(data.n), np.arange(0)
        self.Xtr, self.Xte = data.X[tr], data.X[te]
        self.ytr, self.yte = data.y[tr], data.y[te]
        self.rho, self.rho_te = data.weight[tr], data.weight[te]
        self.sqrt_rho = np.sqrt(self.rho)
        self.n_tr = len(tr)

        # per-variable preparation shared by every smoother call
        self.knot_grids: list[np.ndarray | None] = []
        self.orders: list[np.ndarray | None] = []
        self.eval_tr: list[_ColumnEval] = []
        self.eval_te: list[_ColumnEval] = []
        for j, v in enumerate(data.variables):
            col = self.Xtr[:, j]
            if v.is_categorical:
                self.knot_grids.append(None)
                self.orders.append(None)
            else:
                self.knot_grids.append(thin_knots(np.unique(col)))
                self.orders.append(np.argsort(col, kind="stable"))
            self.eval_tr.append(_ColumnEval(col, self.knot_grids[j]))
            self.eval_te.append(_ColumnEval(self.Xte[:, j], self.knot_grids[j]))

        if tree is None:
            self.b0 = float(np.average(self.ytr, weights=self.rho))
            self.nodes: list[TreeNode] = [TreeNode(ROOT, -1, None, None)]
        else:
            tree.check_schema(data.variables)
            self.b0 = tree.b0
            self.nodes = [replace(n) for n in tree.nodes]
        self.fv_tr: list[np.ndarray | None] = [None]
        self.fv_te: list[np.ndarray | None] = [None]
        self.B_tr: list[np.ndarray] = [np.ones(self.n_tr)]
        self.B_te: list[np.ndarray] = [np.ones(len(te))]
        self.children: dict[int, list[int]] = {ROOT: []}
        self.pathvars: list[frozenset[int]] = [frozenset()]
        for node in self.nodes[1:]:
            self._register(node)
        self.resid = self.ytr - self._predict_train()
        # additions below this gain are float noise, not structure
        self.min_gain = 1e-12 * float(np.sum(self.rho * (self.ytr - np.average(self.ytr, weights=self.rho)) ** 2))
        self.history: list[dict] = []
        self.last_choice: tuple[int, int] | None = None

    # -- plumbing ----------------------------------------------------------

    def _register(self, node: TreeNode) -> None:
        j = node.var
        self.fv_tr.append(self.eval_tr[j].apply(node.func))
        self.fv_te.append(self.eval_te[j].apply(node.func))
        self.B_tr.append(self.B_tr[node.parent] * self.fv_tr[node.id])
        self.B_te.append(self.B_te[node.parent] * self.fv_te[node.id])
        self.children[node.id] = []
        self.children[node.parent].append(node.id)
        self.pathvars.append(self.pathvars[node.parent] | {j})

    def _predict_train(self) -> np.ndarray:
        out = np.full(self.n_tr, self.b0)
        for col in self.B_tr[1:]:
            out += col
        return out

    def _predict_test(self) -> np.ndarray:
        out = np.full(len(self.yte), self.b0)
        for col in self.B_te[1:]:
            out += col
        return out

    def train_sse(self) -> float:
        return float(np.sum(self.rho * self.resid**2))

    def _spec_for(self, j: int) -> SmootherSpec:
        if self.data.variables[j].is_categorical:
            return self.config.categorical_smoother
        return self.config.numeric_smoother

    def _smooth(self, j: int, r: np.ndarray, w: np.ndarray) -> UnivariateFunction:
        return smooth(
            self.Xtr[:, j], r, w, self._spec_for(j),
            order=self.orders[j], knots=self.knot_grids[j], center=False,
        )

    def _subtree(self, k: int) -> list[int]:
        out = [k]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out

    def _refresh_subtree(self, k: int) -> None:
        for m in self._subtree(k):
            if m == ROOT:
                continue
            node = self.nodes[m]
            self.B_tr[m] = self.B_tr[node.parent] * self.fv_tr[m]
            self.B_te[m] = self.B_te[node.parent] * self.fv_te[m]

    def _set_function(self, k: int, func: UnivariateFunction) -> None:
        node = self.nodes[k]
        node.func = func
        self.fv_tr[k] = self.eval_tr[node.var].apply(func)
        self.fv_te[k] = self.eval_te[node.var].apply(func)
        self._refresh_subtree(k)

    def _coweight(self, k: int) -> np.ndarray:
        """Sum over all bases containing node k of the path product with
        node k's own factor removed (computed analytically, never by
        division)."""
        parent_basis = self.B_tr[self.nodes[k].parent]
        partial = {k: np.ones(self.n_tr)}
        total = np.ones(self.n_tr)
        for m in self._subtree(k)[1:]:
            q = partial[self.nodes[m].parent] * self.fv_tr[m]
            partial[m] = q
            total = total + q
        return parent_basis * total

    # -- candidate search --------------------------------------------------

    def _allowed(self, k: int, j: int) -> bool:
        pv = self.pathvars[k] | {j}
        if self.config.max_order and len(pv) > self.config.max_order:
            return False
        return not any(s <= pv for s in self.config.forbidden_subsets)

    def score_candidate(self, k: int, j: int):
        """Fit the (parent=k, variable=j) candidate and line-search its
        scale; returns (sse_reduction, scaled function) or None."""
        if not self._allowed(k, j):
            return None
        w = self.B_tr[k] * self.sqrt_rho
        try:
            f = self._smooth(j, self.resid * self.sqrt_rho, w)
        except ValueError:
            return None
        d = self.B_tr[k] * self.eval_tr[j].apply(f)
        den = float(np.sum(self.rho * d * d))
        if den <= 0.0 or not np.isfinite(den):
            return None
        num = float(np.sum(self.rho * self.resid * d))
        beta = num / den
        return num * num / den, f.scale(beta)

    def score_all_candidates(self) -> list[tuple[float, int, int]]:
        out = []
        for k in range(len(self.nodes)):
            for j in range(self.data.p):
                res = self.score_candidate(k, j)
                if res is not None:
                    out.append((res[0], k, j))
        return out

    def step(self) -> bool:
        """Attach the best-scoring candidate; ties break toward lower node
        id then lower variable index. Returns False when no candidate is
        admissible."""
        best_red = self.min_gain
        best = None
        for k in range(len(self.nodes)):
            for j in range(self.data.p):
                res = self.score_candidate(k, j)
                if res is not None and res[0] > best_red:
                    best_red, best = res[0], (k, j, res[1])
        if best is None:
            return False
        k, j, func = best
        node = TreeNode(len(self.nodes), k, j, func)
        self.nodes.append(node)
        self._register(node)
        self.resid = self.resid - self.B_tr[node.id]
        self.last_choice = (k, j)
        return True

    # -- backfitting and centering ------------------------------------------

    def backfit_pass(self) -> None:
        """Re-estimate every node function in id order, holding the others
        fixed; each update is line-searched so training SSE cannot rise.
        The root constant gets its own exact coordinate step first."""
        shift = float(np.average(self.resid, weights=self.rho))
        self.b0 += shift
        self.resid = self.resid - shift
        for k in range(1, len(self.nodes)):
            node = self.nodes[k]
            cow = self._coweight(k)
            w = cow * self.sqrt_rho
            target = (self.resid + cow * self.fv_tr[k]) * self.sqrt_rho
            try:
                proposal = self._smooth(node.var, target, w)
            except ValueError:
                continue
            direction = combine(proposal, node.func, 1.0, -1.0)
            delta = cow * self.eval_tr[node.var].apply(direction)
            den = float(np.sum(self.rho * delta * delta))
            if den <= 0.0 or not np.isfinite(den):
                continue
            beta = float(np.sum(self.rho * self.resid * delta)) / den
            if beta == 0.0:
                continue
            self._set_function(k, combine(node.func, direction, 1.0, beta))
            self.resid = self.resid - beta * delta

    def recenter(self) -> None:
        """Shift leaf-node functions to zero weighted mean, folding the
        absorbed constant into the root constant (depth-1 leaves) or into an
        exact rescale of the parent and its children (deeper leaves). The
        model's predictions are unchanged."""
        for k in range(1, len(self.nodes)):
            if self.children[k]:
                continue
            node = self.nodes[k]
            parent_basis = self.B_tr[node.parent]
            omega = self.rho * parent_basis**2
            total = float(omega.sum())
            if total <= 0.0:
                continue
            c = float(np.dot(omega, self.fv_tr[k]) / total)
            if c == 0.0:
                continue
            if node.parent == ROOT:
                node.func = node.func.shift(-c)
                self.fv_tr[k] = self.fv_tr[k] - c
                self.fv_te[k] = self.fv_te[k] - c
                self.B_tr[k] = self.fv_tr[k]
                self.B_te[k] = self.fv_te[k]
                self.b0 += c
                continue
            s = 1.0 + c
            if abs(s) < 0.05:
                continue
            q = node.parent
            self.nodes[q].func = self.nodes[q].func.scale(s)
            self.fv_tr[q] = self.fv_tr[q] * s
            self.fv_te[q] = self.fv_te[q] * s
            for ch in self.children[q]:
                f = self.nodes[ch].func
                f = f.shift(-c) if ch == k else f
                self.nodes[ch].func = f.scale(1.0 / s)
                self.fv_tr[ch] = self.eval_tr[self.nodes[ch].var].apply(self.nodes[ch].func)
                self.fv_te[ch] = self.eval_te[self.nodes[ch].var].apply(self.nodes[ch].func)
            self._refresh_subtree(q)

    # -- stopping loop -------------------------------------------------------

    def _snapshot(self) -> FunctionTree:
        tree = FunctionTree(self.data.variables, self.b0, [replace(n) for n in self.nodes])
        B = np.column_stack(self.B_tr[1:]) if len(self.nodes) > 1 else np.empty((self.n_tr, 0))
        mean = np.average(B, axis=0, weights=self.rho) if B.size else np.empty(0)
        var = np.average((B - mean) ** 2, axis=0, weights=self.rho) if B.size else np.empty(0)
        for node in tree.nodes[1:]:
            node.influence = float(np.sqrt(var[node.id - 1]))
        return tree

    def _test_rmse(self) -> float:
        if len(self.yte) < 2 or np.ptp(self.yte) == 0.0:
            return float("nan")
        return rmse(self.yte, self._predict_test(), self.rho_te)

    def run(self) -> FunctionTree:
        cfg = self.config
        if np.ptp(self.ytr) == 0.0:
            warnings.warn("constant outcome; returning a root-only tree", stacklevel=2)
            tree = self._snapshot()
            tree.train_stats = {"train_rmse": 0.0, "test_rmse": 0.0, "n_nodes": 0}
            return tree
        best_rmse = self._test_rmse()
        best_snap = self._snapshot()
        best_train = rmse(self.ytr, self._predict_train(), self.rho)
        bad = 0
        while len(self.nodes) - 1 < cfg.max_nodes:
            if not self.step():
                break
            for _ in range(cfg.backfit_passes):
                self.backfit_pass()
            self.recenter()
            self.resid = self.ytr - self._predict_train()
            te = self._test_rmse()
            self.history.append(
                {"n_nodes": len(self.nodes) - 1, "train_sse": self.train_sse(), "test_rmse": te}
            )
            if np.isnan(te) or te < best_rmse:
                best_rmse = te
                best_snap = self._snapshot()
                best_train = rmse(self.ytr, self._predict_train(), self.rho)
                bad = 0
            else:
                bad += 1
                if bad > cfg.patience:
                    break
        best_snap.train_stats = {
            "train_rmse": best_train,
            "test_rmse": float(best_rmse),
            "n_nodes": best_snap.n_nodes,
        }
        best_snap.fit_history = self.history
        return best_snap


def fit(data: Dataset, config: FitConfig | None = None) -> FunctionTree:
    """Fit a function tree by forward stepwise search with backfitting.

    Candidates are scored on the training partition by squared-error
    reduction; growth stops once the test partition stops improving for
    ``config.patience`` consecutive additions (or at ``max_nodes``), and the
    best-test-error snapshot is returned.
    """
    if data.n < 20:
        raise ValueError("need at least 20 rows to fit")
    return TreeFitter(data, config or FitConfig()).run()


def backfit_pass(tree: FunctionTree, data: Dataset, config: FitConfig | None = None) -> FunctionTree:
    """One backfitting pass over an existing tree against ``data`` (all rows);
    returns a new tree whose training MSE is no worse than the input's."""
    if tree.n_nodes < 1:
        return tree.copy()
    fitter = TreeFitter(data, config or FitConfig(), tree=tree, split=False)
    fitter.backfit_pass()
    fitter.recenter()
    snap = fitter._snapshot()
    snap.train_stats = tree.train_stats
    return snap
