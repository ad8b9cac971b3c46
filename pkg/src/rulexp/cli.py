"""Command line entry point: ``rulexp <command> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

from . import __version__
from .errors import InfeasibleInstance, RulexpError
from .explain import best_reason
from .metrics import Confusion
from .mining import MinerConfig, dump_rules, mine, parse_rules
from .pipeline import PipelineConfig, run_pipeline, score_model
from .rectify import rectify_forest
from .tabular import BinarizedDataset, binarize, load_csv
from .theory import DomainTheory, build_theory, extend_theory
from .trees import dump_forest, learn_forest, learn_tree, load_forest

log = logging.getLogger("rulexp")


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    with open(path, encoding="utf-8-sig", newline="") as fh:
        return fh.read()


def _write(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_json(path: str | None, doc) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        _write(path, text)


def _load_theory(args, forest) -> DomainTheory:
    if getattr(args, "theory", None):
        return DomainTheory.from_dimacs(_read(args.theory))
    return build_theory(forest.conditions)


def cmd_learn(args) -> int:
    data = load_csv(_read(args.data), label=args.label)
    if args.model == "tree":
        f = learn_tree(data, max_depth=args.max_depth, seed=args.seed)
    else:
        f = learn_forest(data, m=args.trees, seed=args.seed, max_depth=args.max_depth)
    dump_forest(f, args.out)
    log.info("learned %d tree(s), %d conditions, %d nodes", f.m, len(f.conditions), f.size)
    return 0


def cmd_binarize(args) -> int:
    f = load_forest(args.model)
    data = load_csv(_read(args.data), label=args.label)
    _write(args.out, binarize(data, f.conditions).to_csv())
    return 0


def cmd_mine(args) -> int:
    if args.binarized:
        db = BinarizedDataset.from_csv(_read(args.binarized))
    else:
        if not (args.data and args.model):
            raise UsageError("mine: give --binarized, or both --data and --model")
        f = load_forest(args.model)
        db = binarize(load_csv(_read(args.data), label=args.label), f.conditions)
    th = build_theory(db.conditions)
    cfg = MinerConfig(max_rule_size=args.rule_size, max_cars=args.max_cars,
                      max_other_rules=args.max_rules, timeout=args.timeout_secs)
    res = mine(db, th, cfg)
    _write(args.out_cars, dump_rules(res.cars, db.conditions))
    if args.out_others:
        _write(args.out_others, dump_rules(res.others, db.conditions))
    if args.out_theory:
        _write(args.out_theory, extend_theory(th, res.others).to_dimacs(db.conditions))
    summary = {"cars": len(res.cars), "others": len(res.others), "timed_out": res.timed_out}
    summary.update({k: v for k, v in res.stats.items() if k != "elapsed"})
    _write_json(args.summary, summary)
    return 0


def cmd_rectify(args) -> int:
    f = load_forest(args.model)
    th = _load_theory(args, f)
    cars = parse_rules(_read(args.rules), f.conditions)
    out, report = rectify_forest(f, cars, th.structural_only())
    dump_forest(out, args.out)
    doc = report.to_dict()
    if not args.timings:
        doc.pop("elapsed")
    _write_json(args.report, doc)
    return 0


def cmd_explain(args) -> int:
    f = load_forest(args.model)
    th = _load_theory(args, f)
    if args.extended_rules:
        th = extend_theory(th, parse_rules(_read(args.extended_rules), f.conditions))
    data = load_csv(_read(args.instances), label=args.label, require_label=False)
    db = binarize(data, f.conditions)
    out = []
    for i, bits in enumerate(db.bits):
        try:
            e = best_reason(f, th, bits, args.orderings, args.seed)
        except InfeasibleInstance as exc:
            out.append({"index": i, "refused": str(exc)})
            continue
        reason = [str(f.conditions[lit.condition]) if lit.polarity else "!" + str(f.conditions[lit.condition])
                  for lit in e.term.sorted()]
        out.append({"index": i, "prediction": e.prediction, "reason": reason, "size": e.size,
                    "theory": e.theory_tag, "ordering_seed": e.ordering_seed})
    _write_json(args.out, out)
    return 0


def cmd_eval(args) -> int:
    f = load_forest(args.model)
    db = binarize(load_csv(_read(args.data), label=args.label), f.conditions)
    scores = score_model(f, db, use_votes=f.m > 1)
    conf = Confusion.from_predictions(db.labels, f.predict_many(db.bits))
    _write_json(args.out, {"f_score": scores.f_score, "g_mean": scores.g_mean, "auc": scores.auc,
                           "confusion": conf._asdict(),
                           "auc_scores": "vote_fraction" if f.m > 1 else "hard_prediction"})
    return 0


def _budgets(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None


def cmd_pipeline(args) -> int:
    data = load_csv(_read(args.data), label=args.label)
    cfg = PipelineConfig(
        model=args.model, splits=args.splits, train_fraction=args.train_fraction,
        num_trees=args.trees, max_depth=args.max_depth,
        miner=MinerConfig(max_rule_size=args.rule_size, max_cars=args.max_cars,
                          timeout=args.timeout_secs),
        orderings=args.orderings, rule_budgets=args.budgets, sample_size=args.sample_size,
        explain_model=args.explain_model, seed=args.seed,
    )
    report, stats = run_pipeline(data, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_json(os.path.join(args.out_dir, "eval_report.json"), report.to_dict(args.timings))
    _write_json(os.path.join(args.out_dir, "explanation_stats.json"),
                [{"rule_budget": s.rule_budget, "red": s.red, "ins": s.ins,
                  "low_support": s.low_support, "sizes_th": s.sizes_th, "sizes_the": s.sizes_the}
                 for s in stats])
    if args.tables:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["split", "f_before", "f_after", "g_before", "g_after", "auc_before", "auc_after",
                    "nodes_before", "nodes_after", "depth_before", "depth_after", "cars", "nr_percent"])
        for s in report.splits:
            w.writerow([s.split, s.before.f_score, s.after.f_score, s.before.g_mean, s.after.g_mean,
                        s.before.auc, s.after.auc, s.nodes_before, s.nodes_after,
                        s.depth_before, s.depth_after, s.num_cars, s.nr_percent])
        _write(os.path.join(args.out_dir, "eval_table.csv"), buf.getvalue())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rule_budget", "red", "ins", "low_support"])
        for s in stats:
            w.writerow([s.rule_budget, s.red, s.ins, int(s.low_support)])
        _write(os.path.join(args.out_dir, "explanation_table.csv"), buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rulexp", description=__doc__)
    p.add_argument("--version", action="version", version=f"rulexp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--label", default="y", help="name of the class column (default y)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = common(sub.add_parser("learn", help="learn a tree or forest from a CSV file"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", choices=("forest", "tree"), default="forest")
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_learn)

    sp = common(sub.add_parser("binarize", help="rewrite a CSV file over a model's conditions"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_binarize)

    sp = common(sub.add_parser("mine", help="mine 100%%-confidence rules"))
    sp.add_argument("--binarized", help="binarized CSV (as written by 'binarize')")
    sp.add_argument("--data")
    sp.add_argument("--model")
    sp.add_argument("--max-rules", type=int, default=1000, help="cap on non-classification rules")
    sp.add_argument("--max-cars", type=int, default=100)
    sp.add_argument("--rule-size", type=int, choices=(2, 3), default=3)
    sp.add_argument("--timeout-secs", type=float, default=3600.0)
    sp.add_argument("--out-cars", required=True)
    sp.add_argument("--out-others")
    sp.add_argument("--out-theory", help="DIMACS theory, structural plus mined sections")
    sp.add_argument("--summary", help="JSON summary path (default stdout)")
    sp.set_defaults(func=cmd_mine)

    sp = common(sub.add_parser("rectify", help="rectify a model by classification rules"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--theory")
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.add_argument("--timings", action="store_true", help="include wall time in the report")
    sp.set_defaults(func=cmd_rectify)

    sp = common(sub.add_parser("explain", help="shortest UP-majoritary reasons for instances"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--theory")
    sp.add_argument("--extended-rules", help="non-classification rules added to the theory")
    sp.add_argument("--instances", required=True)
    sp.add_argument("--orderings", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_explain)

    sp = common(sub.add_parser("eval", help="score a model on labelled data"))
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("pipeline", help="full protocol over repeated splits"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", choices=("forest", "tree"), default="forest")
    sp.add_argument("--splits", type=int, default=10)
    sp.add_argument("--train-fraction", type=float, default=0.7)
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int)
    sp.add_argument("--orderings", type=int, default=100)
    sp.add_argument("--budgets", type=_budgets, default=[0, 100, 1000],
                    help="comma-separated rule budgets for the extended theory")
    sp.add_argument("--sample-size", type=int, default=100)
    sp.add_argument("--max-cars", type=int, default=100)
    sp.add_argument("--rule-size", type=int, choices=(2, 3), default=3)
    sp.add_argument("--timeout-secs", type=float, default=3600.0)
    sp.add_argument("--explain-model", choices=("initial", "rectified"), default="initial")
    sp.add_argument("--out-dir", default="reports")
    sp.add_argument("--tables", action="store_true", help="also write CSV tables")
    sp.add_argument("--timings", action="store_true", help="include wall times in the report")
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"rulexp: error: {exc}\n")
        return 2
    except (RulexpError, OSError, ValueError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
