from collections import Counter

import pytest

from bubblefl.bubbling import (
    BUBBLING,
    COPYING,
    StepFlags,
    bubble,
    code_choice,
    least_dominator,
    paths_to_root,
    root_dominator,
)
from bubblefl.engine import Evaluator, Mode, RunStats
from bubblefl.errors import IsRoot, NotAChoice
from bubblefl.graphstore import Graph
from bubblefl.parser import build_graph, parse_goal
from bubblefl.symtab import SymbolKind, SymbolTable

from .conftest import parse_with_prelude
from .corpus import random_dags


def nested_division_graph(prog):
    """The shared-choice graph of (((3/X)+(X*2))-4) where X = 0 ? 1."""
    g = build_graph(parse_goal("(((3/X)+(X*2))-4) where X = 0 ? 1"), prog)
    (x,) = [n for n in g.reachable() if g.sym(n).kind is SymbolKind.CHOICE]
    return g, x


def label_of(g, n):
    return g.sym(n).name


# ------------------------------------------------------------------- paths

def test_paths_of_nested_division_graph(prelude):
    g, x = nested_division_graph(prelude)
    paths = [[label_of(g, n) for n in p] for p in paths_to_root(g, x)]
    assert sorted(paths) == [["*", "+", "-"], ["/", "+", "-"]]


def test_paths_of_chain(prelude):
    g = build_graph(parse_goal("1 + (2 + 3)"), prelude)
    inner = g.args(g.root)[1]
    x = g.args(inner)[1]  # the literal 3
    assert [[label_of(g, n) for n in p] for p in paths_to_root(g, x)] == [["+", "+"]]


def test_paths_root_is_error(prelude):
    g = build_graph(parse_goal("1 + 2"), prelude)
    with pytest.raises(IsRoot):
        paths_to_root(g, g.root)


# ------------------------------------------------------------------- dominators

def test_least_dominator_of_nested_division(prelude):
    g, x = nested_division_graph(prelude)
    res = least_dominator(g, x)
    assert label_of(g, res.dominator) == "+"
    assert {label_of(g, n) for n in res.ancestral_path} == {"/", "*", "+"}
    assert len(res.ancestral_path) == 3
    assert x not in res.ancestral_path


def test_least_dominator_of_shared_pair(prelude):
    g = build_graph(parse_goal("(Fact X + Fibo X) where X = 2 ? 3"), prelude)
    (x,) = [n for n in g.reachable() if g.sym(n).kind is SymbolKind.CHOICE]
    res = least_dominator(g, x)
    assert res.dominator == g.root
    assert {label_of(g, n) for n in res.ancestral_path} == {"Fact", "Fibo", "+"}


def test_least_dominator_of_single_parent_chain(prelude):
    g = build_graph(parse_goal("leq (leq Z (coin ? Z)) True"), prelude)
    # build a plain 3-node chain instead: f -> g -> x
    symbols = SymbolTable()
    gg = Graph(symbols)
    f = symbols.intern("fo", SymbolKind.OPERATION, 1)
    h = symbols.intern("go", SymbolKind.OPERATION, 1)
    x = gg.add_node(symbols.number(1), [])
    mid = gg.add_node(h, [x])
    top = gg.add_node(f, [mid])
    gg.set_root(top)
    res = least_dominator(gg, x)
    assert res.dominator == mid
    assert res.ancestral_path == {mid}


def test_root_dominator_collects_every_ancestor(prelude):
    g, x = nested_division_graph(prelude)
    res = root_dominator(g, x)
    assert res.dominator == g.root
    assert {label_of(g, n) for n in res.ancestral_path} == {"/", "*", "+", "-"}


def test_root_dominator_of_root_is_error(prelude):
    g = build_graph(parse_goal("0 ? 1"), prelude)
    with pytest.raises(IsRoot):
        root_dominator(g, g.root)


# ------------------------------------------------------------------- bubbling

def test_bubble_shared_pair_geometry(prelude):
    g = build_graph(parse_goal("(Fact X + Fibo X) where X = 2 ? 3"), prelude)
    (x,) = [n for n in g.reachable() if g.sym(n).kind is SymbolKind.CHOICE]
    before = len(g.nodes)
    res = least_dominator(g, x)
    report = bubble(g, x, res.dominator, res.ancestral_path)
    assert report.copies == 6
    assert len(g.nodes) == before + 6
    assert g.root == x  # the dominator was the root
    alts = g.args(g.root)
    assert [label_of(g, a) for a in alts] == ["+", "+"]
    for i, alt in enumerate(alts):
        fact, fibo = g.args(alt)
        assert label_of(g, fact) == "Fact" and label_of(g, fibo) == "Fibo"
        leafs = {g.sym(g.args(fact)[0]).value, g.sym(g.args(fibo)[0]).value}
        assert leafs == {2 if i == 0 else 3}
    assert g.check_invariants() == []


def test_bubble_nested_division_least_dominator(prelude):
    g, x = nested_division_graph(prelude)
    root_before = g.root
    res = least_dominator(g, x)
    report = bubble(g, x, res.dominator, res.ancestral_path)
    assert report.copies == 6
    assert g.root == root_before  # dominator was below the root
    minus = g.root
    choice, four = g.args(minus)
    assert label_of(g, choice) == "?"
    assert g.sym(four).value == 4
    for i, alt in enumerate(g.args(choice)):
        div, times = g.args(alt)
        assert label_of(g, div) == "/"
        assert g.sym(g.args(div)[1]).value == i
        assert g.sym(g.args(times)[0]).value == i
    assert g.check_invariants() == []


def test_bubble_with_root_dominator_copies_more(prelude):
    g, x = nested_division_graph(prelude)
    res = root_dominator(g, x)
    report = bubble(g, x, res.dominator, res.ancestral_path)
    assert report.copies == 8
    assert g.root == x
    assert g.check_invariants() == []


def test_bubble_locality_outside_nodes_untouched(prelude):
    g, x = nested_division_graph(prelude)
    res = least_dominator(g, x)
    ap = res.ancestral_path
    outside = [n for n in g.reachable()
               if n not in ap and n != x]
    before = {n: (g.nodes[n].label, list(g.args(n))) for n in outside}
    bubble(g, x, res.dominator, res.ancestral_path)
    for n in outside:
        label, args = before[n]
        assert g.nodes[g.resolve(n)].label == label
        after = g.args(n)
        for pos, (old, new) in enumerate(zip(args, after)):
            if old == res.dominator:
                assert new == x  # edges into the dominator now reach the choice
            else:
                assert old == new


def test_bubble_rejects_non_choice(prelude):
    g = build_graph(parse_goal("1 + 2"), prelude)
    with pytest.raises(NotAChoice):
        bubble(g, g.args(g.root)[0], g.root, {g.root})


def test_bubble_shared_position_duplicates_per_alternative(prelude):
    g = build_graph(parse_goal("X + X where X = 0 ? 1"), prelude)
    (x,) = [n for n in g.reachable() if g.sym(n).kind is SymbolKind.CHOICE]
    res = least_dominator(g, x)
    assert res.ancestral_path == {g.root}
    bubble(g, x, res.dominator, res.ancestral_path)
    for i, alt in enumerate(g.args(g.root)):
        vals = [g.sym(a).value for a in g.args(alt)]
        assert vals == [i, i]  # both positions take the same alternative
    assert g.check_invariants() == []


# ------------------------------------------------------------------- choice step

def run_code_choice(prog, g, t, strategy=BUBBLING, is_root=False):
    ev = Evaluator(prog, strategy=strategy)
    stats = ev.stats
    flags = code_choice(g, t, strategy, ev.step, Mode.NF, stats, is_root)
    return flags, stats


def test_code_choice_all_fail_rewrites_to_fail(prelude):
    g = build_graph(parse_goal("1 ? 2"), prelude)
    fail = prelude.symbols.fail
    for a in g.args(g.root):
        g.overwrite(a, fail, [])
    _, stats = run_code_choice(prelude, g, g.root, is_root=True)
    assert g.sym(g.root).kind is SymbolKind.FAIL
    assert stats.fails_absorbed == 2


def test_code_choice_single_survivor_collapses(prelude):
    g = build_graph(parse_goal("(1 / 0) ? 7"), prelude)
    left = g.args(g.root)[0]
    g.overwrite(left, prelude.symbols.fail, [])
    _, stats = run_code_choice(prelude, g, g.root, is_root=True)
    assert g.sym(g.root).value == 7
    assert stats.fails_absorbed == 1


def test_code_choice_steps_operation_arguments(prelude):
    g = build_graph(parse_goal("loop ? 1+2"), prelude)
    _, stats = run_code_choice(prelude, g, g.root, is_root=True)
    assert stats.rewrites == 2  # loop -> loop and 1+2 -> 3, one step each
    assert g.sym(g.args(g.root)[1]).value == 3


def test_code_choice_requests_fork_at_root(prelude):
    g = build_graph(parse_goal("0 ? 1"), prelude)
    flags, _ = run_code_choice(prelude, g, g.root, is_root=True)
    assert flags.fork_requested


def test_code_choice_bubbles_below_root(prelude):
    g = build_graph(parse_goal("(0 ? 1) + 5"), prelude)
    (x,) = [n for n in g.reachable() if g.sym(n).kind is SymbolKind.CHOICE]
    flags, stats = run_code_choice(prelude, g, x, is_root=False)
    assert flags.structure_changed
    assert stats.bubbling_invocations == 1
    assert stats.bubbling_copied_nodes == 2
    # the dominator was the old root, so the choice took its place
    assert g.root == x
    assert [g.sym(a).name for a in g.args(x)] == ["+", "+"]
    assert g.check_invariants() == []


# ------------------------------------------------------------------- laws

def test_copy_count_law_on_random_dags():
    # the least-dominator path is always a subset of the root path
    for g in random_dags(300, max_nodes=12, seed=11):
        for x in g.reachable():
            if x == g.root:
                continue
            least = least_dominator(g, x)
            full = root_dominator(g, x)
            assert least.ancestral_path <= full.ancestral_path


def test_semantics_preserved_between_strategies(prelude):
    goals = [
        "(1+X)+(X+2) where X = 0 ? 1",
        "(((3/X)+(X*2))-4) where X = 0 ? 1",
        "(Fact X + Fibo X) where X = 2 ? 3",
        "cons (0 ? 1) (cons coin nil)",
        "(coin + coin) * 10",
    ]
    for text in goals:
        goal = parse_goal(text)
        a = Evaluator(prelude, strategy=BUBBLING).run_goal(goal, 2000)
        b = Evaluator(prelude, strategy=COPYING).run_goal(goal, 2000)
        ca = Counter((o.kind, o.term) for o in a.outcomes if o.kind != "exhausted")
        cb = Counter((o.kind, o.term) for o in b.outcomes if o.kind != "exhausted")
        assert ca == cb, text
