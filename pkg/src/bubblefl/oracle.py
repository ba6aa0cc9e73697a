"""Independent baselines used by the test suites.

Two deliberately naive computations: dominators by materialising and
intersecting every parent path, and non-deterministic enumeration by
substituting one alternative per shared choice and running only
deterministic steps.  Neither shares code with the machinery it checks.
"""
from __future__ import annotations

from itertools import product

from .bubbling import DominatorResult, paths_to_root
from .engine import Evaluator, Mode, Outcome, RunResult
from .errors import IsRoot, NotStaticallyEnumerable, TooLarge
from .graphstore import Graph
from .parser import Call, ChoiceExpr, Expr, Num, Program, Ref, Where


def brute_dominator(g: Graph, x: int) -> DominatorResult:
    """Dominator of x by path intersection; small graphs only.

    The dominator is the common node farthest from the root by shortest
    distance; the ancestral path is recomputed from the path prefixes.
    """
    x = g.resolve(x)
    reach = g.reachable()
    if len(reach) > 20:
        raise TooLarge(f"{len(reach)} reachable nodes; refusing to enumerate paths")
    if x == g.root:
        raise IsRoot("the root has no dominator")

    paths = [list(p) for p in paths_to_root(g, x)]
    common = set(paths[0])
    for p in paths[1:]:
        common &= set(p)

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

    dominator = max(common, key=lambda n: dist[n])
    ap: set[int] = set()
    for p in paths:
        for n in p:
            ap.add(n)
            if n == dominator:
                break
    return DominatorResult(dominator, ap)


# ---------------------------------------------------------------------- substitution

def _ops_called(e: Expr, acc: set[str]) -> None:
    if isinstance(e, Ref):
        acc.add(e.name)
    elif isinstance(e, Call):
        acc.add(e.name)
        for a in e.args:
            _ops_called(a, acc)
    elif isinstance(e, ChoiceExpr):
        _ops_called(e.left, acc)
        _ops_called(e.right, acc)
    elif isinstance(e, Where):
        _ops_called(e.body, acc)
        for _, b in e.bindings:
            _ops_called(b, acc)


def _has_choice(e: Expr) -> bool:
    if isinstance(e, ChoiceExpr):
        return True
    if isinstance(e, Call):
        return any(_has_choice(a) for a in e.args)
    if isinstance(e, Where):
        return _has_choice(e.body) or any(_has_choice(b) for _, b in e.bindings)
    return False


def _check_static(prog: Program, goal: Expr) -> None:
    """Every choice must be syntactically in the goal, not behind a rule."""
    mentioned: set[str] = set()
    _ops_called(goal, mentioned)
    work = [n for n in mentioned if n in prog.rules]
    seen: set[str] = set()
    while work:
        op = work.pop()
        if op in seen:
            continue
        seen.add(op)
        for rule in prog.rules[op]:
            if _has_choice(rule.rhs):
                raise NotStaticallyEnumerable(
                    f"operation {op} unfolds to a choice; the substitution "
                    "oracle cannot enumerate it"
                )
            called: set[str] = set()
            _ops_called(rule.rhs, called)
            work.extend(n for n in called if n in prog.rules)


def _variants(e: Expr) -> list[Expr]:
    """Choice-free variants of an expression; nested choices flatten."""
    if isinstance(e, ChoiceExpr):
        return _variants(e.left) + _variants(e.right)
    if isinstance(e, Call):
        out = []
        for combo in product(*[_variants(a) for a in e.args]):
            out.append(Call(e.name, tuple(combo)))
        return out
    return [e]


def _names_used(e: Expr, acc: set[str]) -> None:
    if isinstance(e, Ref):
        acc.add(e.name)
    elif isinstance(e, Call):
        for a in e.args:
            _names_used(a, acc)
    elif isinstance(e, ChoiceExpr):
        _names_used(e.left, acc)
        _names_used(e.right, acc)


def _substitute(e: Expr, env: dict[str, Expr]) -> Expr:
    if isinstance(e, Ref) and e.name in env:
        return env[e.name]
    if isinstance(e, Call):
        return Call(e.name, tuple(_substitute(a, env) for a in e.args))
    if isinstance(e, ChoiceExpr):
        return ChoiceExpr(_substitute(e.left, env), _substitute(e.right, env))
    return e


def enumerate_by_substitution(
    prog: Program,
    goal: Expr,
    budget: int,
    duplicate_shared: bool = False,
) -> list[Outcome]:
    """Ground-truth call-time-choice enumeration by direct substitution.

    One alternative is chosen per shared choice occurrence class and the
    resulting deterministic goal runs on deterministic steps only.  With
    duplicate_shared the where bindings are inlined first, so each textual
    occurrence decides independently — the deliberately wrong treatment of
    sharing, kept for the sharing experiments.
    """
    _check_static(prog, goal)

    body = goal
    bindings: tuple = ()
    if isinstance(goal, Where):
        body, bindings = goal.body, goal.bindings

    cases: list[Expr] = []
    if duplicate_shared:
        inlined: dict[str, Expr] = {}
        for name, expr in bindings:
            inlined[name] = _substitute(expr, inlined)
        cases = _variants(_substitute(body, inlined))
    else:
        # one world per assignment of the bindings a variant actually
        # mentions: a world that never touches a shared choice must not
        # multiply by its alternatives
        by_name = dict(bindings)
        order = [n for n, _ in bindings]

        def expand(body_variant: Expr, env: dict[str, Expr]) -> None:
            demanded: set[str] = set()
            _names_used(body_variant, demanded)
            for chosen in env.values():
                _names_used(chosen, demanded)
            missing = [n for n in order if n in demanded and n not in env]
            if not missing:
                if env:
                    kept = tuple((n, env[n]) for n in order if n in env)
                    cases.append(Where(body_variant, kept))
                else:
                    cases.append(body_variant)
                return
            name = missing[0]
            for variant in _variants(by_name[name]):
                expand(body_variant, {**env, name: variant})

        for body_variant in _variants(body):
            expand(body_variant, {})

    outcomes: list[Outcome] = []
    for case in cases:
        ev = Evaluator(prog)
        result: RunResult = ev.run_goal(case, budget, Mode.NF)
        if ev.stats.bubbling_invocations or ev.stats.fork_copied_nodes:
            raise NotStaticallyEnumerable(
                "substituted goal still reached a choice"
            )
        outcomes.extend(result.outcomes)
    return outcomes
