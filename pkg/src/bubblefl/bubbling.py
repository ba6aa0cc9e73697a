"""Choice hoisting by graph transformation.

A needed choice under several parents is moved up to its least dominator:
every node on a parent path between the choice and the dominator (the
ancestral path) is cloned once per alternative, the choice takes the
dominator's place, and everything outside the ancestral path is shared
untouched.  Copying the whole graph is the special case whose dominator
is the root.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

from .errors import BadDominator, IsRoot, NotAChoice
from .graphstore import Graph
from .symtab import SymbolKind

BUBBLING = "bubbling"
COPYING = "copying"


@dataclass
class DominatorResult:
    dominator: int
    ancestral_path: set[int]  # includes the dominator, never the choice


@dataclass
class BubbleReport:
    choice: int
    dominator: int
    ap_size: int
    k: int
    copies: int
    dominator_is_root: bool
    dominator_label: str


@dataclass
class StepFlags:
    structure_changed: bool = False
    fork_requested: bool = False

    def merge(self, other: "StepFlags") -> None:
        self.structure_changed |= other.structure_changed
        self.fork_requested |= other.fork_requested


# ---------------------------------------------------------------------- paths

def paths_to_root(g: Graph, x: int) -> Iterator[list[int]]:
    """All parent paths from x to the root, lazily.

    Each path is [p1, ..., pk] with p1 a parent of x and pk the root.
    Only small graphs should materialise this; the dominator computation
    below never does.
    """
    x = g.resolve(x)
    root = g.root
    if x == root:
        raise IsRoot("the root has no paths to itself")

    def walk(n: int) -> Iterator[list[int]]:
        for p in g.parents(n):
            p = g.resolve(p)
            if p == root:
                yield [p]
            else:
                for rest in walk(p):
                    yield [p] + rest

    return walk(x)


def _ancestors(g: Graph, x: int) -> set[int]:
    out: set[int] = set()
    work = [x]
    while work:
        for p in g.parents(work.pop()):
            p = g.resolve(p)
            if p not in out:
                out.add(p)
                work.append(p)
    return out


def _descendants(g: Graph, a: int) -> set[int]:
    out: set[int] = set()
    work = [a]
    while work:
        for c in g.args(work.pop()):
            if c not in out:
                out.add(c)
                work.append(c)
    return out


def ancestral_path_to(g: Graph, x: int, a: int) -> set[int]:
    """Nodes on some parent path from x to a, including a, excluding x."""
    up = _ancestors(g, x)
    down = _descendants(g, a)
    down.add(a)
    return up & down


def least_dominator(g: Graph, x: int) -> DominatorResult:
    """Immediate dominator of x in the rooted DAG, plus its ancestral path.

    Dominator sets are intersected over the parents in one topological
    pass (the graph is acyclic, so a single pass is exact).  The recorded
    min/max depth bounds stay out of this computation: after parent
    deletions they over-approximate, which makes them unsound as a
    candidate filter; they remain trace metadata only.
    """
    x = g.resolve(x)
    root = g.root
    if x == root:
        raise IsRoot("the root has no dominator")

    reach = g.reachable()
    # parents before children: reverse of a postorder over argument edges
    order = g.topo_order(reach)
    dom: dict[int, set[int]] = {root: {root}}
    for n in order:
        if n == root:
            continue
        parents = g.parents(n)
        acc: set[int] | None = None
        for p in parents:
            p = g.resolve(p)
            acc = set(dom[p]) if acc is None else acc & dom[p]
        acc = acc if acc is not None else set()
        acc.add(n)
        dom[n] = acc

    candidates = dom[x] - {x}
    # proper dominators form a chain; the immediate one has the largest set
    a = max(candidates, key=lambda d: len(dom[d]))
    return DominatorResult(a, ancestral_path_to(g, x, a))


def root_dominator(g: Graph, x: int) -> DominatorResult:
    """The copying strategy's dominator: the root, with every ancestor in AP."""
    x = g.resolve(x)
    if x == g.root:
        raise IsRoot("the root has no dominator")
    return DominatorResult(g.root, _ancestors(g, x))


def _reaches_via_args(g: Graph, start: int, target: int) -> bool:
    seen = set()
    work = [start]
    while work:
        n = g.resolve(work.pop())
        if n == target:
            return True
        if n in seen:
            continue
        seen.add(n)
        work.extend(g.nodes[n].args)
    return False


def _escaping_choices(g: Graph, x: int, ap: set[int]) -> list[int]:
    """Choices on the path whose some alternative does not reach x.

    Hoisting x across such a choice would replicate that alternative's
    worlds once per alternative of x, changing the outcome multiset.
    """
    out = []
    for c in sorted(ap):
        if g.sym(c).kind is not SymbolKind.CHOICE:
            continue
        if any(not _reaches_via_args(g, arm, x) for arm in g.args(c)):
            out.append(c)
    return out


def plan_hoist(g: Graph, x: int, strategy: str):
    """Pick the choice to hoist and its target, avoiding world duplication.

    Starts from x with its strategy dominator (root under copying, least
    otherwise).  If the ancestral path crosses a choice with an arm that
    does not contain x, that outer choice must decide first: the plan
    moves to it.  An offending root choice cannot be hoisted at all and
    asks the engine to fork instead.  Returns ("bubble", x, dominator,
    ancestral path) or ("fork_root",).
    """
    x = g.resolve(x)
    dist = {g.root: 0}
    queue = [g.root]
    while queue:
        nxt = []
        for n in queue:
            for a in g.args(n):
                if a not in dist:
                    dist[a] = dist[n] + 1
                    nxt.append(a)
        queue = nxt
    while True:
        if x == g.root:
            return ("fork_root",)
        if strategy == COPYING:
            dom = root_dominator(g, x)
        else:
            dom = least_dominator(g, x)
        offenders = _escaping_choices(g, x, dom.ancestral_path)
        if not offenders:
            return ("bubble", x, dom.dominator, dom.ancestral_path)
        x = min(offenders, key=lambda n: (dist[n], n))


# ---------------------------------------------------------------------- bubbling

def bubble(g: Graph, x: int, a: int, ap: set[int]) -> BubbleReport:
    """Hoist choice x into the place of its dominator a.

    Clones every ancestral-path node once per alternative, wires the
    clones' edges (inside the path to sibling clones, at the choice to the
    matching alternative, outside the path shared), points former edges
    into a at x, and makes x the root when a was the root.  The original
    path nodes become garbage.
    """
    x = g.resolve(x)
    xsym = g.sym(x)
    if xsym.kind is not SymbolKind.CHOICE:
        raise NotAChoice(f"node #{x} is {xsym.name}, not a choice")
    alts = g.args(x)
    k = len(alts)
    if k < 2:
        raise NotAChoice(f"choice #{x} has arity {k}; nothing to hoist")
    ap = {g.resolve(n) for n in ap}
    a = g.resolve(a)
    if a not in ap or x in ap:
        raise BadDominator("ancestral path must contain the dominator and not the choice")
    for n in ap:
        if n == a:
            continue
        for p in g.parents(n):
            if g.resolve(p) not in ap:
                raise BadDominator(f"parent #{p} of path node #{n} escapes the path")
    for p in g.parents(x):
        if g.resolve(p) not in ap:
            raise BadDominator(f"parent #{p} of the choice escapes the path")

    was_root = a == g.root
    a_entry = g.nodes[a]
    a_min, a_max = a_entry.min_depth, a_entry.max_depth

    order = sorted(ap)
    copies: dict[tuple[int, int], int] = {}
    for n in order:
        for i in range(k):
            copies[(n, i)] = g._alloc(g.nodes[n].label)

    # edges of the clones
    for n in order:
        for i in range(k):
            nid = copies[(n, i)]
            entry = g.nodes[nid]
            for pos, raw in enumerate(g.nodes[n].args):
                m = g.resolve(raw)
                if m in ap:
                    tgt = copies[(m, i)]
                elif m == x:
                    tgt = alts[i]
                else:
                    tgt = m
                entry.args.append(tgt)
                g.nodes[tgt].backpointers.append((nid, pos))

    # edges into a from outside the path now reach the choice
    for p, pos in list(g.nodes[a].backpointers):
        if g.resolve(p) in ap:
            continue
        g.nodes[p].args[pos] = x
        g.nodes[a].backpointers.remove((p, pos))
        g.nodes[x].backpointers.append((p, pos))

    # the choice's children become the dominator clones
    for pos, alt in enumerate(alts):
        g._remove_bp(alt, x, pos)
    g.nodes[x].args = [copies[(a, i)] for i in range(k)]
    for pos, c in enumerate(g.nodes[x].args):
        g.nodes[c].backpointers.append((x, pos))

    # detach the original path nodes; their depths stay stale by design
    for n in order:
        entry = g.nodes[n]
        for pos, raw in enumerate(entry.args):
            m = g.resolve(raw)
            if m not in ap:
                g._remove_bp(m, n, pos)
        entry.args = []
    for n in order:
        g.nodes[n].backpointers = []

    if was_root:
        g.set_root(x)
    else:
        g.update_depths(x, a_min - 1, a_max - 1)
    xe = g.nodes[x]
    for c in xe.args:
        g.update_depths(c, xe.min_depth, xe.max_depth)

    return BubbleReport(
        choice=x,
        dominator=a,
        ap_size=len(ap),
        k=k,
        copies=len(ap) * k,
        dominator_is_root=was_root,
        dominator_label=g.symbols.sym(a_entry.label).name,
    )


# ---------------------------------------------------------------------- choice step

def code_choice(
    g: Graph,
    t: int,
    strategy: str,
    stepper: Callable[[Graph, int, object], StepFlags],
    mode,
    stats,
    is_eval_root: bool,
    trace: Callable[[BubbleReport], None] | None = None,
) -> StepFlags:
    """One step on a choice node.

    Failed alternatives are dropped first.  While every remaining
    alternative is an operation, each gets one step.  Once an alternative
    is ready — head normal form, or itself a choice, which only ever
    moves upward — the arity decides: no alternatives means failure, one
    alternative collapses the choice, several mean hoisting, or a fork
    signal when the choice is the evaluation root, which has no dominator.
    """
    t = g.resolve(t)
    if g.sym(t).kind is not SymbolKind.CHOICE:
        raise NotAChoice(f"node #{t} is not a choice")

    args = g.args(t)
    kept = [a for a in args if g.sym(a).kind is not SymbolKind.FAIL]
    if len(kept) != len(args):
        stats.fails_absorbed += len(args) - len(kept)
        g.set_choice_args(t, kept)
        args = kept

    flags = StepFlags()
    if not args:
        g.overwrite(t, g.symbols.fail, [])
        stats.rewrites += 1
        return flags

    kinds = [g.sym(a).kind for a in args]
    if all(k is SymbolKind.OPERATION for k in kinds):
        for a in args:
            sub = stepper(g, a, mode)
            flags.merge(sub)
            if sub.structure_changed or sub.fork_requested:
                break
        return flags

    # some alternative is ready
    if len(args) == 1:
        g.redirect(t, args[0])
        stats.rewrites += 1
        return flags

    if is_eval_root:
        flags.fork_requested = True
        return flags

    plan = plan_hoist(g, t, strategy)
    if plan[0] == "fork_root":
        flags.fork_requested = True
        return flags
    _, moved, dominator, ap = plan
    report = bubble(g, moved, dominator, ap)
    stats.bubbling_invocations += 1
    stats.bubbling_copied_nodes += report.copies
    stats.bubble_events.append(report)
    if trace is not None:
        trace(report)
    flags.structure_changed = True
    return flags
