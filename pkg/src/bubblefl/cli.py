"""Command-line driver: load a program, evaluate a goal, print outcomes.

Exit codes: 0 when at least one value was found, 1 when only failures,
2 when no value was found and some alternative ran out of budget, 3 on
parse or static errors, 4 when --check-invariants finds a violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

from .bubbling import BUBBLING, COPYING
from .deftrees import dump_tree
from .engine import Evaluator, Mode
from .errors import BubbleError, CorruptStore
from .oracle import enumerate_by_substitution
from .parser import parse_goal, parse_sources

SUBST_ORACLE = "substitution-oracle"


def _load_prelude(path: str | None) -> tuple[str, str]:
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            return path, fh.read()
    text = resources.files("bubblefl").joinpath("prelude.fl").read_text("utf-8")
    return "<prelude>", text


def _build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bubblefl")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a goal against a program")
    run.add_argument("program", help="program file (UTF-8, -- comments)")
    run.add_argument("--goal", help="goal expression to evaluate")
    run.add_argument("--mode", choices=["nf", "hnf"], default="nf")
    run.add_argument(
        "--strategy",
        choices=[BUBBLING, COPYING, SUBST_ORACLE],
        default=BUBBLING,
    )
    run.add_argument("--max-rounds", type=int, default=10000)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--all", action="store_true", help="report every outcome (default)")
    group.add_argument("--first", type=int, metavar="K", help="stop after K values")
    run.add_argument("--distinct", action="store_true", help="suppress duplicate values")
    run.add_argument("--sorted", action="store_true", help="sort value lines")
    run.add_argument("--stats", action="store_true")
    run.add_argument("--stats-json", action="store_true")
    run.add_argument("--trace", action="store_true", help="log bubbling events")
    run.add_argument("--check-invariants", action="store_true")
    run.add_argument("--dump-trees", action="store_true")
    run.add_argument("--prelude", metavar="PATH", help="alternative prelude file")
    run.add_argument("--no-prelude", action="store_true")
    return ap


def _outcome_lines(outcomes, distinct: bool, sort_values: bool) -> list[str]:
    values = []
    rest = []
    seen = set()
    for o in outcomes:
        if o.kind == "value":
            if distinct and o.term in seen:
                continue
            seen.add(o.term)
            values.append(f"value: {o.term}")
        elif o.kind == "failure":
            rest.append("failure")
        else:
            rest.append("exhausted")
    if sort_values:
        values.sort()
    return values + rest


def _exit_code(outcomes) -> int:
    kinds = {o.kind for o in outcomes}
    if "value" in kinds:
        return 0
    if "exhausted" in kinds:
        return 2
    return 1


def stats_report(stats) -> dict:
    """Per-run counters with a stable key order."""
    return stats.as_dict()


def run(args) -> int:
    sources = []
    if not args.no_prelude:
        sources.append(_load_prelude(args.prelude))
    try:
        with open(args.program, encoding="utf-8") as fh:
            sources.append((args.program, fh.read()))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    try:
        prog = parse_sources(sources)
        trace_fn = None
        if args.trace:
            def trace_fn(event):
                print(
                    f"bubble: choice=#{event.choice} dominator=#{event.dominator}"
                    f" |AP|={event.ap_size} k={event.k} copies={event.copies}"
                )

        if args.strategy == SUBST_ORACLE:
            evaluator = None
        else:
            evaluator = Evaluator(
                prog,
                strategy=args.strategy,
                check_invariants=args.check_invariants,
                trace=trace_fn,
            )

        if args.dump_trees:
            if evaluator is None:
                evaluator = Evaluator(prog)
            for op in prog.rules:
                print(dump_tree(op, evaluator.trees[op], prog.symbols))
            if args.goal is None:
                return 0

        if args.goal is None:
            print("error: --goal is required unless --dump-trees is given",
                  file=sys.stderr)
            return 3

        goal = parse_goal(args.goal)
        mode = Mode.NF if args.mode == "nf" else Mode.HNF
        if args.strategy == SUBST_ORACLE:
            outcomes = enumerate_by_substitution(prog, goal, args.max_rounds)
            stats = None
        else:
            result = evaluator.run_goal(
                goal, args.max_rounds, mode,
                max_values=args.first,
            )
            outcomes, stats = result.outcomes, result.stats
    except CorruptStore as exc:
        print(f"invariant check failed: {exc}", file=sys.stderr)
        return 4
    except BubbleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    for line in _outcome_lines(outcomes, args.distinct, args.sorted):
        print(line)
    if stats is not None and args.stats_json:
        print(json.dumps(stats_report(stats)))
    elif stats is not None and args.stats:
        for key, val in stats_report(stats).items():
            print(f"{key}={val}")
    return _exit_code(outcomes)


def main(argv=None) -> int:
    sys.setrecursionlimit(20000)
    args = _build_arg_parser().parse_args(argv)
    if args.command == "run":
        return run(args)
    return 3


if __name__ == "__main__":
    sys.exit(main())
