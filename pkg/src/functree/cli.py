"""Command-line frontend: generators, fitting, effect search, grids,
model differencing, bootstrap comparison, and surrogate fitting.

All randomness flows from --seed, and every command writes byte-identical
outputs for identical flags and inputs. Progress goes to stderr, results to
stdout and the requested files. Exit codes: 0 success, 2 bad flags, 3 data
or model-file errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

from .data import (
    DataError,
    Dataset,
    SplitSpec,
    gen_friedman,
    gen_hu,
    load_csv,
    rmse_target,
    split_indices,
    write_csv,
)
from .interactions import bootstrap_compare, conditional_interaction, pure_interaction, search_effects
from .pdengine import pa as pa_effect
from .pdengine import pd_brute, pd_fast, write_effect_csv
from .smoothers import SmootherSpec
from .tree import (
    FitConfig,
    FormatVersionError,
    FunctionTree,
    SchemaMismatchError,
    difference,
    fit,
    load,
    save,
)

_DATA_ERRORS = (DataError, FileNotFoundError, IsADirectoryError, SchemaMismatchError,
                FormatVersionError, KeyError, ValueError)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_data(args, target: str | None = None, exclude: tuple[str, ...] = ()) -> Dataset:
    cats = tuple(args.categorical.split(",")) if getattr(args, "categorical", "") else ()
    return load_csv(
        args.data,
        target=target if target is not None else args.target,
        categorical_override=cats,
        cat_threshold=getattr(args, "cat_threshold", 10),
        exclude=exclude,
    )


def _var_indices(names_arg: str, variables) -> tuple[int, ...]:
    lut = {v.name: j for j, v in enumerate(variables)}
    out = []
    for name in names_arg.split(","):
        name = name.strip()
        if name not in lut:
            raise DataError(f"unknown variable {name!r}")
        out.append(lut[name])
    return tuple(out)


def _fit_config(args) -> FitConfig:
    # --forbid names resolve to indices later, once the data is loaded
    numeric = SmootherSpec(args.numeric_method, span=args.span)
    return FitConfig(
        max_nodes=args.max_nodes,
        max_order=args.max_order,
        numeric_smoother=numeric,
        split=SplitSpec(args.test_fraction, args.seed),
        backfit_passes=args.backfit_passes,
        patience=args.patience,
    )


def _resolve_forbidden(config: FitConfig, args, variables) -> FitConfig:
    if not args.forbid:
        return config
    subsets = tuple(frozenset(_var_indices(spec, variables)) for spec in args.forbid)
    return FitConfig(
        max_nodes=config.max_nodes,
        max_order=config.max_order,
        forbidden_subsets=subsets,
        numeric_smoother=config.numeric_smoother,
        categorical_smoother=config.categorical_smoother,
        split=config.split,
        backfit_passes=config.backfit_passes,
        patience=config.patience,
    )


def _print_fit_summary(tree: FunctionTree, data: Dataset) -> None:
    stats = tree.train_stats or {}
    print(f"nodes: {tree.n_nodes}")
    print(f"max interaction order: {tree.max_interaction_order()}")
    print(f"train rmse: {stats.get('train_rmse', float('nan')):.6g}")
    print(f"test rmse: {stats.get('test_rmse', float('nan')):.6g}")
    if data.truth is not None:
        r2 = 1.0 - rmse_target(data.truth, tree.predict(data.X)) ** 2
        print(f"target variance explained: {r2:.6g}")
    print("node influences:")
    print("  id parent var order influence")
    for node in tree.nodes[1:]:
        name = data.variables[node.var].name
        print(
            f"  {node.id:>3} {node.parent:>6} {name:>4} "
            f"{tree.interaction_order(node.id):>5} {node.influence:.6g}"
        )


def cmd_gen(args) -> int:
    if args.example == "friedman":
        snr = math.inf if args.snr == 0 else args.snr
        data = gen_friedman(args.n, seed=args.seed, sd_x=args.sd_x, snr=snr)
    else:
        data = gen_hu(args.n, seed=args.seed, mode=args.mode)
    write_csv(data, args.out)
    _progress(f"wrote {data.n} rows x {data.p} predictors to {args.out}")
    return 0


def cmd_fit(args) -> int:
    data = _load_data(args)
    config = _resolve_forbidden(_fit_config(args), args, data.variables)
    _progress(f"fitting on {data.n} rows, {data.p} predictors")
    tree = fit(data, config)
    save(tree, args.out)
    _print_fit_summary(tree, data)
    _progress(f"model written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    tree = load(args.model)
    data = _load_data(args)
    tree.check_schema(data.variables)
    pred = tree.predict(data.X)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prediction"])
        for v in pred:
            writer.writerow([repr(float(v))])
    _progress(f"wrote {len(pred)} predictions to {args.out}")
    return 0


def cmd_effects(args) -> int:
    tree = load(args.model)
    data = _load_data(args)
    tree.check_schema(data.variables)
    report = search_effects(
        tree,
        data,
        max_order=args.max_order,
        use_screens=not args.no_screen,
        with_pa=args.pa,
        strength_rows=args.strength_rows,
        seed=args.seed,
    )
    report.to_csv(args.out)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(report.screening_text(data.names))
    _progress(f"evaluation cost: fast {report.fast_evals:.4g}, brute-equivalent {report.brute_equiv:.4g}")
    print("top effects:")
    for e in report.top(k=10):
        extra = "" if e.strength_pa is None else f" (pa {e.strength_pa:.4g})"
        print(f"  {{{','.join(e.names)}}}: {e.strength:.4g}{extra}")
    _progress(f"report written to {args.out}")
    return 0


def cmd_pd(args) -> int:
    tree = load(args.model)
    data = _load_data(args)
    tree.check_schema(data.variables)
    subset = _var_indices(args.vars, data.variables)
    if args.pa:
        grid = pa_effect(tree, subset, None, data, resolution=args.grid)
    elif args.brute:
        grid = pd_brute(tree.predict, subset, None, data, resolution=args.grid)
    else:
        grid = pd_fast(tree, subset, None, data, resolution=args.grid)
    write_effect_csv(grid, args.out, data.variables)
    _progress(f"{grid.kind} grid with {grid.n_points} points written to {args.out}")
    return 0


def cmd_interact(args) -> int:
    tree = load(args.model)
    data = _load_data(args)
    tree.check_schema(data.variables)
    subset = _var_indices(args.vars, data.variables)
    method = "brute" if args.brute else "fast"
    if args.cond:
        cond = {}
        for spec in args.cond:
            name, _, value = spec.partition("=")
            j = _var_indices(name, data.variables)[0]
            var = data.variables[j]
            cond[j] = float(var.levels.index(value)) if var.is_categorical else float(value)
        grid = conditional_interaction(tree, subset, cond, None, data,
                                       resolution=args.grid, method=method)
    elif args.brute:
        from .interactions import pure_interaction_brute

        grid = pure_interaction_brute(tree.predict, subset, None, data, resolution=args.grid)
    else:
        grid = pure_interaction(tree, subset, None, data, resolution=args.grid)
    write_effect_csv(grid, args.out, data.variables)
    _progress(f"{grid.kind} grid with {grid.n_points} points written to {args.out}")
    return 0


def cmd_diff(args) -> int:
    a = load(args.model_a)
    b = load(args.model_b)
    save(difference(a, b), args.out)
    _progress(f"difference model written to {args.out}")
    return 0


def cmd_bootstrap(args) -> int:
    data = _load_data(args)
    orders = [int(tok) for tok in args.max_orders.split(",")]
    base = _resolve_forbidden(_fit_config(args), args, data.variables)
    configs = []
    labels = []
    for order in orders:
        configs.append(
            FitConfig(
                max_nodes=base.max_nodes,
                max_order=order,
                forbidden_subsets=base.forbidden_subsets,
                numeric_smoother=base.numeric_smoother,
                split=base.split,
                backfit_passes=base.backfit_passes,
                patience=base.patience,
            )
        )
        labels.append("unconstrained" if order == 0 else f"max_order={order}")
    _progress(f"bootstrap: {args.reps} replicates x {len(configs)} configs")
    result = bootstrap_compare(data, configs, reps=args.reps, seed=args.seed, labels=labels)
    result.to_csv(args.out)
    qs = result.quantiles()
    print("config,q25,median,q75")
    for label, row in zip(result.labels, qs):
        print(f"{label},{row[0]:.6g},{row[1]:.6g},{row[2]:.6g}")
    _progress(f"replicate table written to {args.out}")
    return 0


def cmd_surrogate(args) -> int:
    exclude = tuple(tok for tok in (args.exclude.split(",") if args.exclude else []) if tok)
    data = _load_data(args, target=args.pred, exclude=exclude)
    config = _resolve_forbidden(_fit_config(args), args, data.variables)
    _progress(f"fitting surrogate to column {args.pred!r}")
    tree = fit(data, config)
    save(tree, args.out)
    _print_fit_summary(tree, data)
    stats = tree.train_stats or {}
    print(f"fidelity rmse (vs predictions): {stats.get('test_rmse', float('nan')):.6g}")
    if data.truth is not None:
        _, te = split_indices(data.n, config.split)
        fidelity = rmse_target(data.truth[te], tree.predict(data.X[te]))
        print(f"target rmse (vs truth, test rows): {fidelity:.6g}")
    _progress(f"surrogate model written to {args.out}")
    return 0


def _add_data_flags(p, target_default="y"):
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--target", default=target_default, help="outcome column name")
    p.add_argument("--categorical", default="", help="comma list of columns to force categorical")
    p.add_argument("--cat-threshold", dest="cat_threshold", type=int, default=10,
                   help="max distinct values for automatic categorical typing")


def _add_fit_flags(p):
    p.add_argument("--max-nodes", dest="max_nodes", type=int, default=200)
    p.add_argument("--max-order", dest="max_order", type=int, default=0,
                   help="interaction-order cap (0 = unlimited, 1 = additive)")
    p.add_argument("--forbid", action="append", default=[],
                   help="comma list of variables no single path may jointly contain (repeatable)")
    p.add_argument("--numeric-method", dest="numeric_method", default="local_linear",
                   choices=["local_linear", "near_neighbor"])
    p.add_argument("--span", type=float, default=0.15, help="smoother neighborhood fraction")
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.2)
    p.add_argument("--backfit-passes", dest="backfit_passes", type=int, default=2)
    p.add_argument("--patience", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="functree",
        description="Fit function-tree models and analyze their interaction structure.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("--threads", type=int, default=1,
                        help="worker-count cap (this build computes serially)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add_parser("gen", help="write a synthetic benchmark dataset")
    p.add_argument("--example", choices=["friedman", "hu"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--snr", type=float, default=2.0, help="signal/noise ratio (friedman; 0 = noiseless)")
    p.add_argument("--sd-x", dest="sd_x", type=float, default=0.5, help="predictor scale (friedman)")
    p.add_argument("--mode", choices=["regression", "classification"], default="regression")
    p.set_defaults(func=cmd_gen)

    p = add_parser("fit", help="fit a function tree to a CSV dataset")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_fit)

    p = add_parser("predict", help="evaluate a model on a dataset")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = add_parser("effects", help="search and rank main and interaction effects")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--max-order", dest="max_order", type=int, default=3, choices=[1, 2, 3, 4])
    p.add_argument("--no-screen", dest="no_screen", action="store_true")
    p.add_argument("--pa", action="store_true", help="add a partial-association strength column")
    p.add_argument("--strength-rows", dest="strength_rows", type=int, default=None,
                   help="row subsample for strength evaluation")
    p.add_argument("--log", default=None, help="write the screening log to this file")
    p.set_defaults(func=cmd_effects)

    p = add_parser("pd", help="export a partial dependence (or association) grid")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--vars", required=True, help="comma list of variable names")
    p.add_argument("--grid", type=int, default=50, help="points per numeric variable")
    p.add_argument("--out", required=True)
    p.add_argument("--pa", action="store_true", help="partial association instead of dependence")
    p.add_argument("--brute", action="store_true", help="brute-force averaging instead of the fast path")
    p.set_defaults(func=cmd_pd)

    p = add_parser("interact", help="export a pure-interaction grid")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--vars", required=True)
    p.add_argument("--cond", action="append", default=[],
                   help="pin a variable, e.g. x6=2 (repeatable)")
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--brute", action="store_true")
    p.set_defaults(func=cmd_interact)

    p = add_parser("diff", help="write the difference model of two fits")
    p.add_argument("--model-a", dest="model_a", required=True)
    p.add_argument("--model-b", dest="model_b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diff)

    p = add_parser("bootstrap", help="compare constrained refits over bootstrap replicates")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--max-orders", dest="max_orders", default="0,2,1",
                   help="comma list of interaction-order caps, one config each")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = add_parser("surrogate", help="fit a tree to another model's predictions")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--pred", required=True, help="column holding the black-box predictions")
    p.add_argument("--exclude", default="", help="comma list of columns to drop (e.g. the raw outcome)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_surrogate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
