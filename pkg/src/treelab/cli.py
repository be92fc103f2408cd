"""Command-line surface: data generation, training, local prediction,
learnability estimation, size estimation, self-verification, and TSV sweep
emission.

Config precedence is flags > config file (`key = value` lines) > defaults.
Seeds default to 0, never to entropy.  Human output rounds to 6 decimal
places; --machine switches to full-precision repr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import numpy as np

from .core import (LabeledDataset, LabelOracle, Point, RandomnessTape,
                   read_dataset, write_dataset, write_trace)
from .estimator import BudgetError, estimate_learnability, query_budget_report
from .exhaustive import (ConcentrationConfig, check_shallow_splits,
                         check_telescoping, empirical_concentration,
                         exact_size_expectation)
from .impurity import (TheoryParams, builtin_impurities, get_impurity,
                       recommended_params)
from .learners import minibatch_top_down, top_down_full, top_down_size_estimate
from .local import estimate_size, local_learner
from .targets import (parse_target, random_monotone_tree_target,
                      random_truth_table, sample_dataset)
from .trees import leaf_paths, parse_tree, random_partial_tree, serialize_tree


def _fmt(x: float, machine: bool) -> str:
    return repr(float(x)) if machine else f"{float(x):.6f}"


def _need(args, *names) -> None:
    """Required options are checked post-parse so a --config file can
    supply them."""
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise ValueError("missing required option(s): "
                         + ", ".join("--" + n for n in missing))


def _parse_point(text: str, d: int) -> Point:
    if len(text) != d or any(c not in "+-" for c in text):
        raise ValueError(f"--x must be a length-{d} string of '+'/'-', got {text!r}")
    return Point.from_signs([1 if c == "+" else -1 for c in text])


def _read_dataset_file(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return read_dataset(fh)


def _require_labeled(ds, path: str) -> LabeledDataset:
    if not isinstance(ds, LabeledDataset):
        raise ValueError(f"{path}: labeled dataset required")
    return ds


def _print_theory(args, file=None) -> None:
    params = TheoryParams(s=args.s, t=args.t, eps=args.eps, delta=args.delta,
                          eta=args.eta, d=args.theory_d,
                          slack_b=args.slack_b, slack_n=args.slack_n,
                          slack_b_local=args.slack_local)
    rec = recommended_params(params, get_impurity(args.impurity))
    print(f"theory: D={rec.D} b={rec.b} b_min={rec.b_min} b_local={rec.b_local} "
          f"n={rec.n} m={rec.m} delta_gain={_fmt(rec.delta_gain, args.machine)}",
          file=file)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    _need(args, "target", "d", "n", "out")
    target = parse_target(args.target, args.d)
    tape = RandomnessTape(args.seed)
    ds = sample_dataset(target, args.n, tape, key="gen-data")
    if args.unlabeled:
        ds = ds.unlabeled()
    with open(args.out, "w", encoding="utf-8") as fh:
        write_dataset(ds, fh)
    print(f"wrote {args.out} d={args.d} n={args.n} target={args.target}")
    return 0


def cmd_train(args) -> int:
    _need(args, "t", "data")
    ds = _require_labeled(_read_dataset_file(args.data), args.data)
    impurity = get_impurity(args.impurity)
    tape = RandomnessTape(args.seed)
    if args.algo == "full":
        result = top_down_full(args.t, ds, impurity)
    elif args.algo == "minibatch":
        result = minibatch_top_down(args.t, args.b, ds, impurity, tape)
    else:
        result = top_down_size_estimate(args.t, args.b, ds, impurity, tape)
    if args.out_tree:
        with open(args.out_tree, "w", encoding="utf-8") as fh:
            fh.write(serialize_tree(result.tree) + "\n")
    if args.out_trace:
        with open(args.out_trace, "w", encoding="utf-8") as fh:
            write_trace(result.trace, fh)
    line = f"size={result.tree.size} depth={result.tree.depth} splits={len(result.trace)}"
    if result.size_estimate is not None:
        line += f" e={_fmt(result.size_estimate, args.machine)}"
    print(line)
    if args.theory:
        args.theory_d = ds.d
        _print_theory(args)
    return 0


def cmd_local_predict(args) -> int:
    _need(args, "t", "unlabeled", "target", "x")
    ds = _read_dataset_file(args.unlabeled)
    if isinstance(ds, LabeledDataset):
        ds = ds.unlabeled()
    target = parse_target(args.target, ds.d)
    x = _parse_point(args.x, ds.d)
    oracle = LabelOracle(target, ds)
    tape = RandomnessTape(args.seed)
    label = local_learner(args.t, args.b, ds, oracle, x, get_impurity(args.impurity), tape)
    line = f"label={label}"
    if args.report_queries:
        line += f" unique_labels={oracle.query_count} batches={oracle.batches_drawn}"
    print(line)
    if args.theory:
        args.theory_d = ds.d
        _print_theory(args)
    return 0


def cmd_estimate(args) -> int:
    _need(args, "t", "unlabeled", "target", "test")
    ds = _read_dataset_file(args.unlabeled)
    if isinstance(ds, LabeledDataset):
        ds = ds.unlabeled()
    test = _require_labeled(_read_dataset_file(args.test), args.test)
    target = parse_target(args.target, ds.d)
    impurity = get_impurity(args.impurity)
    tape = RandomnessTape(args.seed)
    oracle = LabelOracle(target, ds)
    report = estimate_learnability(args.t, args.b, ds, oracle, test, impurity, tape)
    # The exact size t' of the would-be tree is a diagnostic only the global
    # run knows; rebuild it here from fully-labeled data under the same tape.
    labeled = LabeledDataset(ds.d, ds.masks, target.eval_masks(ds.masks))
    global_run = top_down_size_estimate(args.t, args.b, labeled, impurity, tape)
    print(f"error={_fmt(report.error, args.machine)} "
          f"unique_labels={report.unique_labels} batches={report.batches_drawn} "
          f"t_prime={global_run.tree.size}")
    if args.budget_report:
        budget = query_budget_report(oracle, args.t, args.b, test.n)
        with open(args.budget_report, "w", encoding="utf-8") as fh:
            json.dump({"unique_labels": budget.unique_labels,
                       "batches_drawn": budget.batches_drawn,
                       "bound": budget.bound,
                       "phases": budget.phase_counts}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.theory:
        args.theory_d = ds.d
        _print_theory(args)
    return 0


def cmd_size_estimate(args) -> int:
    _need(args, "tree", "d")
    with open(args.tree, "r", encoding="utf-8") as fh:
        tree = parse_tree(fh.read(), args.d)
    tape = RandomnessTape(args.seed)
    strands = tape.uniform_masks(args.d, args.m, "size-estimate")
    e = estimate_size(tree, strands)
    line = f"e={_fmt(e, args.machine)} size={tree.size} m={args.m}"
    if args.exact:
        line += f" expectation={_fmt(exact_size_expectation(tree), args.machine)}"
    print(line)
    return 0


def cmd_verify(args) -> int:
    failures = 0

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        if ok:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name} {detail}".rstrip())

    grid = np.linspace(0.0, 1.0, 1025)
    for g in builtin_impurities():
        vals = np.asarray(g(grid))
        ok = (abs(float(g(0.0))) <= 1e-12 and abs(float(g(1.0))) <= 1e-12
              and abs(float(g(0.5)) - 1.0) <= 1e-12)
        sym = float(np.max(np.abs(vals - vals[::-1])))
        a, bv = np.meshgrid(grid[::8], grid[::8])
        mids = np.asarray(g((a + bv) / 2.0))
        conc = float(np.min(mids - (np.asarray(g(a)) + np.asarray(g(bv))) / 2.0))
        hoelder = float(np.max(np.abs(np.asarray(g(a)) - np.asarray(g(bv)))
                               - g.C * np.abs(a - bv) ** g.alpha))
        report(f"impurity-axioms[{g.name}]",
               ok and sym <= 1e-12 and conc >= -1e-12 and hoelder <= 1e-9,
               f"sym={sym:g} conc={conc:g} hoelder={hoelder:g}")

    rng = np.random.default_rng(args.seed)
    bad = 0
    for _ in range(args.trials):
        d = 8
        tree = random_partial_tree(rng, d, n_leaves=int(rng.integers(1, 10)))
        target = random_truth_table(rng, d)
        leaves = [p for p, _ in leaf_paths(tree)]
        path = leaves[int(rng.integers(len(leaves)))]
        free = [i for i in range(d) if i not in {c for c, _ in path}]
        if not free:
            continue
        coord = int(free[int(rng.integers(len(free)))])
        g = builtin_impurities()[int(rng.integers(3))]
        if not check_telescoping(g, target, tree, (path, coord)):
            bad += 1
    report("telescoping", bad == 0, f"{bad}/{args.trials} failed")

    bad = 0
    for seed in range(5):
        target = random_monotone_tree_target(np.random.default_rng(1000 + seed), d=10)
        ds = sample_dataset(target, 4096, RandomnessTape(seed), key="verify")
        run = minibatch_top_down(64, 64, ds, get_impurity("gini"), RandomnessTape(seed))
        if not check_shallow_splits(run.trace):
            bad += 1
    report("shallow-splits", bad == 0, f"{bad}/5 traces failed")

    bad = 0
    for _ in range(20):
        tree = random_partial_tree(rng, 10, n_leaves=int(rng.integers(2, 20)))
        if exact_size_expectation(tree) != tree.size:
            bad += 1
    report("size-expectation", bad == 0, f"{bad}/20 trees failed")

    target = parse_target("dictator:1", 8)
    cfg = ConcentrationConfig(target=target, impurity=get_impurity("gini"),
                              leaf_path=(), coord=0, b=256, n=512,
                              seed=args.seed, gain_tolerance=0.25)
    rate = empirical_concentration("gain-accuracy", cfg, trials=min(args.trials, 200))
    report("gain-concentration", rate <= 0.2, f"failure rate {rate:g}")
    rate = empirical_concentration("balance", cfg, trials=min(args.trials, 200))
    report("balance-concentration", rate <= 0.2, f"failure rate {rate:g}")

    print(f"{'ok' if failures == 0 else 'FAILURES'}: {failures} failing check(s)")
    return 1 if failures else 0


def cmd_sweep(args) -> int:
    _need(args, "vary", "values", "target", "d")
    if args.theory:
        args.theory_d = args.d
        _print_theory(args, file=sys.stderr)  # keep stdout a clean table
    values = [int(v) for v in args.values.split(",")]
    impurity = get_impurity(args.impurity)
    rows = ["\t".join(["param", "error", "unique_labels", "t_prime"])]
    for value in values:
        for seed in range(args.seeds):
            t, b, n = args.t, args.b, args.n
            if args.vary == "b":
                b = value
            elif args.vary == "t":
                t = value
            else:
                n = value
            tape = RandomnessTape(args.seed + seed)
            target = parse_target(args.target, args.d)
            train = sample_dataset(target, n, tape, key="sweep-train").unlabeled()
            test = sample_dataset(target, args.test_n, tape, key="sweep-test")
            oracle = LabelOracle(target, train)
            report = estimate_learnability(t, b, train, oracle, test, impurity, tape)
            labeled = LabeledDataset(train.d, train.masks, target.eval_masks(train.masks))
            t_prime = top_down_size_estimate(t, b, labeled, impurity, tape).tree.size
            rows.append("\t".join([str(value), _fmt(report.error, args.machine),
                                   str(report.unique_labels), str(t_prime)]))
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# Parser plumbing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--machine", action="store_true", help="full-precision output")
    p.add_argument("--config", default=None,
                   help="file of 'key = value' lines; flags take precedence")


def _add_theory(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theory", action="store_true",
                   help="print the resolved parameter recommendations")
    p.add_argument("--s", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.25)
    p.add_argument("--slack-b", type=float, default=1.0)
    p.add_argument("--slack-n", type=float, default=1.0)
    p.add_argument("--slack-local", type=float, default=1.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="treelab")
    subs = parser.add_subparsers(dest="command", required=True)
    sub_map = {}

    p = subs.add_parser("gen-data", help="sample a dataset from a target")
    p.add_argument("--target", default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--unlabeled", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)
    sub_map["gen-data"] = p

    p = subs.add_parser("train", help="grow a tree from labeled data")
    p.add_argument("--algo", choices=["full", "minibatch", "size-estimate"],
                   default="minibatch")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--b", type=int, default=64)
    p.add_argument("--impurity", default="gini")
    p.add_argument("--data", default=None)
    p.add_argument("--out-tree", default=None)
    p.add_argument("--out-trace", default=None)
    _add_common(p)
    _add_theory(p)
    p.set_defaults(func=cmd_train)
    sub_map["train"] = p

    p = subs.add_parser("local-predict", help="label one point with few queries")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--b", type=int, default=64)
    p.add_argument("--impurity", default="gini")
    p.add_argument("--unlabeled", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--x", default=None, help="point as a +/- string, e.g. '+-++'")
    p.add_argument("--report-queries", action="store_true")
    _add_common(p)
    _add_theory(p)
    p.set_defaults(func=cmd_local_predict)
    sub_map["local-predict"] = p

    p = subs.add_parser("estimate", help="estimate the would-be tree's test error")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--b", type=int, default=64)
    p.add_argument("--impurity", default="gini")
    p.add_argument("--unlabeled", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--budget-report", default=None)
    _add_common(p)
    _add_theory(p)
    p.set_defaults(func=cmd_estimate)
    sub_map["estimate"] = p

    p = subs.add_parser("size-estimate", help="strand-based tree size estimate")
    p.add_argument("--tree", default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--m", type=int, default=256)
    p.add_argument("--exact", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_size_estimate)
    sub_map["size-estimate"] = p

    p = subs.add_parser("verify", help="run the brute-force self checks")
    p.add_argument("--trials", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_verify)
    sub_map["verify"] = p

    p = subs.add_parser("sweep", help="emit a TSV table over a parameter sweep")
    p.add_argument("--vary", choices=["b", "t", "n"], default=None)
    p.add_argument("--values", default=None, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--target", default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--t", type=int, default=32)
    p.add_argument("--b", type=int, default=64)
    p.add_argument("--test-n", type=int, default=200)
    p.add_argument("--impurity", default="gini")
    p.add_argument("--out", default=None)
    _add_common(p)
    _add_theory(p)
    p.set_defaults(func=cmd_sweep)
    sub_map["sweep"] = p

    return parser, sub_map


def _load_config(path: str) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _apply_config(sub: argparse.ArgumentParser, cfg: dict, argv: list) -> None:
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for action in sub._actions:
        dest = action.dest
        if dest in ("help", "func") or dest not in cfg or dest in given:
            continue
        raw = cfg[dest]
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            value = action.type(raw)
        else:
            value = raw
        sub.set_defaults(**{dest: value})


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub_map = build_parser()
    if "--config" in " ".join(argv):
        # Apply config-file defaults to the chosen subcommand before parsing.
        path = None
        for k, tok in enumerate(argv):
            if tok == "--config" and k + 1 < len(argv):
                path = argv[k + 1]
            elif tok.startswith("--config="):
                path = tok.split("=", 1)[1]
        cmd = next((a for a in argv if not a.startswith("-")), None)
        if path and cmd in sub_map:
            _apply_config(sub_map[cmd], _load_config(path), argv)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, BudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
