"""The evaluation strategy: single rewriting steps, head-normal-form and
normal-form computation, and fair enumeration of all values.

Evaluation keeps a queue of alternative graphs and gives each one
rewriting step per turn, so a diverging alternative cannot starve a
terminating one.  A choice that reaches the evaluation root with two or
more live alternatives forks the queue; everywhere else choices are
hoisted in place by bubbling.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from . import bubbling
from .bubbling import BUBBLING, COPYING, StepFlags
from .deftrees import (
    DefTree,
    FailMatch,
    NeedStep,
    RewriteTo,
    build_deftree,
    match_step,
)
from .errors import CorruptStore, NotNormalForm
from .graphstore import Graph
from .parser import Call, ChoiceExpr, Expr, Num, Program, Ref, Where, build_graph
from .symtab import BUILTIN_OPS, SymbolKind


class Mode(Enum):
    HNF = "hnf"
    NF = "nf"


@dataclass(frozen=True)
class Outcome:
    kind: str  # "value" | "failure" | "exhausted"
    term: str | None = None

    @staticmethod
    def value(term: str) -> "Outcome":
        return Outcome("value", term)


FAILURE = Outcome("failure")
EXHAUSTED = Outcome("exhausted")


@dataclass
class RunStats:
    rounds: int = 0
    rewrites: int = 0
    bubbling_invocations: int = 0
    bubbling_copied_nodes: int = 0
    fork_copied_nodes: int = 0
    peak_table_size: int = 0
    fails_absorbed: int = 0
    bubble_events: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "rewrites": self.rewrites,
            "bubbling_invocations": self.bubbling_invocations,
            "bubbling_copied_nodes": self.bubbling_copied_nodes,
            "fork_copied_nodes": self.fork_copied_nodes,
            "peak_table_size": self.peak_table_size,
            "fails_absorbed": self.fails_absorbed,
        }


@dataclass
class RunResult:
    outcomes: list[Outcome]
    stats: RunStats

    def values(self) -> list[str]:
        return [o.term for o in self.outcomes if o.kind == "value"]


# ---------------------------------------------------------------------- printing

def print_value(g: Graph, n: int) -> str:
    """Canonical text of a normal form; sharing is flattened."""
    n = g.resolve(n)
    sym = g.sym(n)
    if sym.kind is SymbolKind.NUMBER:
        return sym.name
    if sym.kind is not SymbolKind.CONSTRUCTOR:
        raise NotNormalForm(f"node #{n} is {sym.name}, not a value")
    if not g.nodes[n].args:
        return sym.name
    return f"{sym.name}({', '.join(print_value(g, a) for a in g.args(n))})"


def print_term(g: Graph, n: int) -> str:
    """Generic term text, tolerating operations, choices and fail."""
    n = g.resolve(n)
    sym = g.sym(n)
    args = g.args(n)
    if sym.kind is SymbolKind.NUMBER or not args:
        return sym.name
    if sym.kind is SymbolKind.CHOICE:
        inner = " ? ".join(print_term(g, a) for a in args)
        return f"({inner})"
    if sym.name in BUILTIN_OPS:
        return f"({print_term(g, args[0])} {sym.name} {print_term(g, args[1])})"
    return f"{sym.name}({', '.join(print_term(g, a) for a in args)})"


# ---------------------------------------------------------------------- evaluator

class Evaluator:
    def __init__(
        self,
        prog: Program,
        strategy: str = BUBBLING,
        check_invariants: bool = False,
        trace=None,
    ):
        self.prog = prog
        self.strategy = strategy
        self.check = check_invariants
        self.trace = trace
        self.stats = RunStats()
        self.trees: dict[str, DefTree] = {
            op: build_deftree(rules, prog.constructors, prog.symbols)
            for op, rules in prog.rules.items()
        }
        self._true = prog.symbols.intern("True", SymbolKind.CONSTRUCTOR, 0)
        self._false = prog.symbols.intern("False", SymbolKind.CONSTRUCTOR, 0)

    # -------------------------------------------------------------- stepping

    def step(self, g: Graph, t: int, mode: Mode) -> StepFlags:
        """One rewriting step on t, per its label kind.

        Within one call each needed argument is touched at most once; a
        structural change (bubbling) aborts the remaining sibling steps of
        the round.  Single-successor descents iterate in place, so deeply
        grown spines cannot exhaust the interpreter stack.
        """
        flags = StepFlags()
        while True:
            t = g.resolve(t)
            sym = g.sym(t)
            kind = sym.kind

            if kind in (SymbolKind.FAIL, SymbolKind.NUMBER, SymbolKind.VARIABLE):
                return flags

            if kind is SymbolKind.CONSTRUCTOR:
                if mode is Mode.HNF:
                    return flags
                ops = self._maximal_ops(g, t)
                if any(g.sym(o).kind is SymbolKind.FAIL for o in ops):
                    g.overwrite(t, g.symbols.fail, [])
                    self.stats.rewrites += 1
                    return flags
                if len(ops) == 1:
                    t = ops[0]
                    continue
                for o in ops:
                    sub = self.step(g, o, mode)
                    flags.merge(sub)
                    if sub.structure_changed or sub.fork_requested:
                        break
                return flags

            if kind is SymbolKind.CHOICE:
                is_root = t == g.root
                flags.merge(bubbling.code_choice(
                    g, t, self.strategy, self.step, mode, self.stats, is_root,
                    self.trace,
                ))
                return flags

            # operation-rooted
            if sym.name in BUILTIN_OPS:
                nxt = self._builtin_step(g, t, sym.name, mode, flags)
                if nxt is None:
                    return flags
                t = nxt
                continue
            decision = match_step(g, t, self.trees[sym.name])
            if isinstance(decision, FailMatch):
                g.overwrite(t, g.symbols.fail, [])
                self.stats.rewrites += 1
                return flags
            if isinstance(decision, NeedStep):
                t = decision.position
                continue
            assert isinstance(decision, RewriteTo)
            self._apply_rewrite(g, t, decision.rule.rhs, decision.bindings)
            self.stats.rewrites += 1
            return flags

    def _maximal_ops(self, g: Graph, t: int) -> list[int]:
        """Outermost non-value positions under a constructor, document order."""
        out: list[int] = []
        seen: set[int] = set()
        stack = [a for a in reversed(g.args(t))]
        while stack:
            n = g.resolve(stack.pop())
            if n in seen:
                continue
            seen.add(n)
            kind = g.sym(n).kind
            if kind in (SymbolKind.CONSTRUCTOR, SymbolKind.NUMBER):
                stack.extend(reversed(g.nodes[n].args))
            elif kind in (SymbolKind.OPERATION, SymbolKind.CHOICE, SymbolKind.FAIL):
                out.append(n)
        return out

    def _builtin_step(self, g: Graph, t: int, name: str, mode: Mode,
                      flags: StepFlags) -> int | None:
        """Arithmetic and comparisons demand number arguments.

        All reducible arguments receive one step in the same round; a fail
        or a non-number value at either position fails the redex.  Returns
        the single node still needing the step when there is exactly one,
        so the caller can descend without recursing.
        """
        args = g.args(t)
        kinds = [g.sym(a).kind for a in args]
        if any(k in (SymbolKind.FAIL, SymbolKind.CONSTRUCTOR, SymbolKind.VARIABLE)
               for k in kinds):
            g.overwrite(t, g.symbols.fail, [])
            self.stats.rewrites += 1
            return None
        pending = [a for a, k in zip(args, kinds) if k is not SymbolKind.NUMBER]
        if len(pending) == 1:
            return pending[0]
        if pending:
            for a in pending:
                sub = self.step(g, a, mode)
                flags.merge(sub)
                if sub.structure_changed or sub.fork_requested:
                    break
            return None
        x = g.sym(args[0]).value
        y = g.sym(args[1]).value
        if name == "+":
            g.overwrite(t, g.symbols.number(x + y), [])
        elif name == "-":
            g.overwrite(t, g.symbols.number(x - y), [])
        elif name == "*":
            g.overwrite(t, g.symbols.number(x * y), [])
        elif name == "/":
            if y == 0:
                g.overwrite(t, g.symbols.fail, [])
            else:
                g.overwrite(t, g.symbols.number(x // y), [])
        elif name == "==":
            g.overwrite(t, self._true if x == y else self._false, [])
        elif name == "<=":
            g.overwrite(t, self._true if x <= y else self._false, [])
        else:
            raise CorruptStore(f"unknown builtin {name}")
        self.stats.rewrites += 1
        return None

    def _apply_rewrite(self, g: Graph, redex: int, rhs: Expr,
                       bindings: dict[str, int]) -> None:
        """Rewrite the redex to the rule's right-hand side in place.

        A bare-variable right-hand side collapses the redex onto the bound
        node; anything else overwrites the redex with a freshly built top.
        """
        if isinstance(rhs, Ref) and rhs.name in bindings:
            g.redirect(redex, bindings[rhs.name])
            return
        if isinstance(rhs, Num):
            g.overwrite(redex, g.symbols.number(rhs.value), [])
            return
        if isinstance(rhs, Ref):
            g.overwrite(redex, g.symbols.lookup(rhs.name).id, [])
            return
        if isinstance(rhs, ChoiceExpr):
            left = instantiate_rhs(g, rhs.left, bindings)
            right = instantiate_rhs(g, rhs.right, bindings)
            g.overwrite(redex, g.symbols.choice, [left, right])
            return
        assert isinstance(rhs, Call)
        sym = g.symbols.lookup(rhs.name)
        args = [instantiate_rhs(g, a, bindings) for a in rhs.args]
        g.overwrite(redex, sym.id, args)

    # -------------------------------------------------------------- enumeration

    def run_goal(
        self,
        goal: Expr,
        budget: int,
        mode: Mode = Mode.NF,
        max_values: int | None = None,
        max_rewrites: int | None = None,
    ) -> RunResult:
        g = build_graph(goal, self.prog)
        return self.run_graph(g, budget, mode, max_values, max_rewrites)

    def run_graph(
        self,
        g: Graph,
        budget: int,
        mode: Mode = Mode.NF,
        max_values: int | None = None,
        max_rewrites: int | None = None,
    ) -> RunResult:
        """Drive the frontier until every alternative settles or budget ends.

        budget counts top-level rounds; max_rewrites optionally caps total
        rewrites as well, since one round may rewrite every needed argument
        of a widening term (exhaustion semantics either way).
        """
        stats = self.stats = RunStats()
        outcomes: list[Outcome] = []
        frontier: deque[Graph] = deque([g])
        self._note_graph(g)
        if self.check:
            report = g.check_invariants()
            if report:
                raise CorruptStore(
                    "invariant violations in the initial graph:\n  "
                    + "\n  ".join(report)
                )

        def emit_value(graph: Graph) -> bool:
            outcomes.append(Outcome.value(self._render(graph, mode)))
            return max_values is not None and \
                sum(1 for o in outcomes if o.kind == "value") >= max_values

        # A failed alternative is one dropped branch of the search, exactly
        # like a fail removed from a choice's arguments; it only surfaces
        # as a Failure outcome when the whole run yields nothing else.
        while frontier and stats.rounds < budget and \
                (max_rewrites is None or stats.rewrites < max_rewrites):
            g = frontier.popleft()
            state = self._classify(g, mode)
            if state == "value":
                if emit_value(g):
                    return RunResult(outcomes, stats)
                continue
            if state == "failure":
                stats.fails_absorbed += 1
                continue
            stats.rounds += 1
            flags = self.step(g, g.root, mode)
            if self.check:
                report = g.check_invariants()
                if report:
                    raise CorruptStore(
                        "invariant violations after step:\n  "
                        + "\n  ".join(report) + "\n" + g.dump()
                    )
            self._note_graph(g)
            if flags.fork_requested:
                for alt in self._fork(g):
                    frontier.append(alt)
                continue
            frontier.append(g)

        for g in frontier:
            state = self._classify(g, mode)
            if state == "value":
                if emit_value(g):
                    break
            elif state == "failure":
                stats.fails_absorbed += 1
            else:
                outcomes.append(EXHAUSTED)
        if not outcomes:
            outcomes.append(FAILURE)
        return RunResult(outcomes, stats)

    def _note_graph(self, g: Graph) -> None:
        if len(g.nodes) > self.stats.peak_table_size:
            self.stats.peak_table_size = len(g.nodes)

    def _render(self, g: Graph, mode: Mode) -> str:
        if mode is Mode.NF:
            return print_value(g, g.root)
        return print_term(g, g.root)

    def _classify(self, g: Graph, mode: Mode) -> str | None:
        root = g.root
        kind = g.sym(root).kind
        if kind is SymbolKind.FAIL:
            return "failure"
        if kind is SymbolKind.NUMBER:
            return "value"
        if kind is SymbolKind.CONSTRUCTOR:
            if mode is Mode.HNF:
                return "value"
            if g._is_value_subgraph(root):
                return "value"
        return None

    def _fork(self, g: Graph) -> list[Graph]:
        """Split a root choice into one fresh graph per alternative.

        Nested choice children are flattened into their own children; fail
        children are dropped like the in-place removal would.
        """
        alts: list[int] = []

        def flatten(n: int) -> None:
            n = g.resolve(n)
            kind = g.sym(n).kind
            if kind is SymbolKind.FAIL:
                self.stats.fails_absorbed += 1
                return
            if kind is SymbolKind.CHOICE:
                for a in g.args(n):
                    flatten(a)
                return
            alts.append(n)

        for a in g.args(g.root):
            flatten(a)
        out = []
        for n in alts:
            ng, copied = copy_subgraph(g, n)
            self.stats.fork_copied_nodes += copied
            self._note_graph(ng)
            out.append(ng)
        return out


def copy_subgraph(g: Graph, n: int) -> tuple[Graph, int]:
    """Deep-copy the reachable subgraph at n into a fresh graph.

    Sharing is preserved; returns the new graph (rooted at the copy) and
    the number of nodes copied.
    """
    ng = Graph(g.symbols)
    memo: dict[int, int] = {}

    def copy(m: int) -> int:
        m = g.resolve(m)
        if m in memo:
            return memo[m]
        entry = g.nodes[m]
        args = [copy(a) for a in entry.args]
        nid = ng.add_node(entry.label, args)
        memo[m] = nid
        return nid

    root = copy(n)
    ng.set_root(root)
    return ng, len(memo)


def instantiate_rhs(g: Graph, rhs: Expr, bindings: dict[str, int]) -> int:
    """Build a rule right-hand side bottom-up in the graph.

    Repeated variables map to the same bound node, preserving sharing.  A
    bare variable returns the bound node itself (the collapsing case).
    """
    if isinstance(rhs, Num):
        return g.number_node(rhs.value)
    if isinstance(rhs, Ref):
        if rhs.name in bindings:
            return bindings[rhs.name]
        sym = g.symbols.lookup(rhs.name)
        if sym.kind is SymbolKind.CONSTRUCTOR:
            return g.leaf(sym.id)
        return g.add_node(sym.id, [])
    if isinstance(rhs, ChoiceExpr):
        return g.add_node(
            g.symbols.choice,
            [instantiate_rhs(g, rhs.left, bindings),
             instantiate_rhs(g, rhs.right, bindings)],
        )
    assert isinstance(rhs, Call)
    sym = g.symbols.lookup(rhs.name)
    return g.add_node(
        sym.id, [instantiate_rhs(g, a, bindings) for a in rhs.args]
    )


def enumerate_normal_forms(
    prog: Program,
    goal: Expr,
    budget: int,
    mode: Mode = Mode.NF,
    strategy: str = BUBBLING,
) -> list[Outcome]:
    """All outcomes of a goal under the given budget, in discovery order."""
    return Evaluator(prog, strategy=strategy).run_goal(goal, budget, mode).outcomes
