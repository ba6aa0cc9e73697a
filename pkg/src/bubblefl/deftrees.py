"""Definitional trees: build one per defined operation, then answer what a
redex needs next — a rewrite, a step on an inner position, or failure.

Rules whose left-hand sides are variants of each other fold into a single
leaf whose right-hand side is the right-associated choice of their
right-hand sides in source order, so non-deterministic definitions need
no or-nodes in the tree.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import CorruptStore, NotInductivelySequential
from .graphstore import Graph
from .parser import Call, ChoiceExpr, Expr, Num, PCon, PLit, Pattern, PVar, Ref, Rule
from .symtab import SymbolKind, SymbolTable

Path = tuple[int, ...]


@dataclass
class Leaf:
    rule: Rule  # possibly synthesized by variant folding


@dataclass
class Branch:
    position: Path                      # argument path, 0-based
    children: dict[int, "DefTree"]      # keyed by constructor/number symbol id
    default: "DefTree | None" = None
    pattern: tuple[Pattern, ...] = ()   # the abstract argument pattern at this node


DefTree = Leaf | Branch


# ---------------------------------------------------------------------- decisions

@dataclass
class RewriteTo:
    rule: Rule
    bindings: dict[str, int]


@dataclass
class NeedStep:
    position: int  # node id needing a step


@dataclass
class FailMatch:
    pass


Decision = RewriteTo | NeedStep | FailMatch


# ---------------------------------------------------------------------- building

def _canonical(params: tuple[Pattern, ...]) -> str:
    """Shape of a pattern list with variables numbered in traversal order.

    Two left-hand sides are variants exactly when their canonical shapes
    are equal (patterns are linear, so renaming is positional).
    """
    counter = itertools.count()

    def walk(p: Pattern) -> str:
        if isinstance(p, PVar):
            return f"v{next(counter)}"
        if isinstance(p, PLit):
            return f"#{p.value}"
        return f"{p.name}({','.join(walk(a) for a in p.args)})"

    return ",".join(walk(p) for p in params)


def _var_positions(params: tuple[Pattern, ...]) -> list[Path]:
    """Variable positions in leftmost-outermost (preorder) order."""
    out: list[Path] = []

    def walk(p: Pattern, path: Path) -> None:
        if isinstance(p, PVar):
            out.append(path)
        elif isinstance(p, PCon):
            for i, a in enumerate(p.args):
                walk(a, path + (i,))

    for i, p in enumerate(params):
        walk(p, (i,))
    return out


def _sub(params: tuple[Pattern, ...], path: Path) -> Pattern:
    cur: Pattern = params[path[0]]
    for i in path[1:]:
        cur = cur.args[i]  # type: ignore[union-attr]
    return cur


def _replace(params: tuple[Pattern, ...], path: Path, new: Pattern) -> tuple[Pattern, ...]:
    def rep(p: Pattern, rest: Path) -> Pattern:
        if not rest:
            return new
        assert isinstance(p, PCon)
        i = rest[0]
        args = tuple(
            rep(a, rest[1:]) if j == i else a for j, a in enumerate(p.args)
        )
        return PCon(p.name, args)

    i = path[0]
    return tuple(
        rep(p, path[1:]) if j == i else p for j, p in enumerate(params)
    )


def _rename_expr(e: Expr, mapping: dict[str, str]) -> Expr:
    if isinstance(e, Ref):
        return Ref(mapping.get(e.name, e.name))
    if isinstance(e, Call):
        return Call(e.name, tuple(_rename_expr(a, mapping) for a in e.args))
    if isinstance(e, ChoiceExpr):
        return ChoiceExpr(_rename_expr(e.left, mapping), _rename_expr(e.right, mapping))
    return e


def _fold_variants(rules: list[Rule]) -> Rule:
    """Fold variant rules into one whose RHS is their right-associated choice.

    The folded rule gets one variable name per position (anonymous slots of
    one rule may be named in another), and every RHS is renamed to those.
    """
    if len(rules) == 1:
        return rules[0]
    base = rules[0]
    positions = _var_positions(base.params)
    used: set[str] = set()
    fresh = itertools.count()
    merged_name: dict[Path, str] = {}
    for pos in positions:
        name = None
        for r in rules:
            v = _sub(r.params, pos)
            assert isinstance(v, PVar)
            if v.name is not None and v.name not in used:
                name = v.name
                break
        while name is None or name in used:
            name = f"v{next(fresh)}"
        used.add(name)
        merged_name[pos] = name
    merged = base.params
    for pos, nm in merged_name.items():
        merged = _replace(merged, pos, PVar(nm))
    renamed = []
    for r in rules:
        mapping = {}
        for pos, nm in merged_name.items():
            v = _sub(r.params, pos)
            if v.name is not None and v.name != nm:  # type: ignore[union-attr]
                mapping[v.name] = nm  # type: ignore[union-attr]
        renamed.append(_rename_expr(r.rhs, mapping))
    rhs = renamed[-1]
    for e in reversed(renamed[:-1]):
        rhs = ChoiceExpr(e, rhs)
    return Rule(base.op, merged, rhs, base.source, base.line)


def build_deftree(rules: list[Rule], constructors: dict[str, int],
                  symbols: SymbolTable) -> DefTree:
    """Build the definitional tree for one operation's rules."""
    if not rules:
        raise NotInductivelySequential("no rules")
    op = rules[0].op
    arity = len(rules[0].params)
    fresh = itertools.count()
    start = tuple(PVar(f".{next(fresh)}") for _ in range(arity))

    def build(pattern: tuple[Pattern, ...], active: list[Rule]) -> DefTree:
        canon = _canonical(pattern)
        variants = [r for r in active if _canonical(r.params) == canon]
        if variants:
            if len(variants) != len(active):
                raise NotInductivelySequential(
                    f"rules of {op} overlap: a variant of {canon} competes with "
                    "a more specific rule"
                )
            return Leaf(_fold_variants(variants))

        chosen: Path | None = None
        for pos in _var_positions(pattern):
            if all(not isinstance(_sub(r.params, pos), PVar) for r in active):
                chosen = pos
                break
        if chosen is None:
            raise NotInductivelySequential(
                f"rules of {op} have no argument position demanded by all of them"
            )

        heads = [_sub(r.params, chosen) for r in active]
        lits = [h for h in heads if isinstance(h, PLit)]
        if lits and len(lits) != len(heads):
            raise NotInductivelySequential(
                f"rules of {op} mix literal and constructor patterns at one position"
            )

        groups: dict[int, list[Rule]] = {}
        child_pat: dict[int, Pattern] = {}
        for r, h in zip(active, heads):
            if isinstance(h, PLit):
                key = symbols.number(h.value)
                child_pat.setdefault(key, h)
            else:
                assert isinstance(h, PCon)
                sym = symbols.lookup(h.name)
                if sym is None:
                    raise CorruptStore(f"constructor {h.name} not interned")
                key = sym.id
                child_pat.setdefault(
                    key,
                    PCon(h.name, tuple(
                        PVar(f".{next(fresh)}") for _ in range(constructors[h.name])
                    )),
                )
            groups.setdefault(key, []).append(r)

        children = {
            key: build(_replace(pattern, chosen, child_pat[key]), group)
            for key, group in groups.items()
        }
        return Branch(chosen, children, None, pattern)

    return build(start, list(rules))


# ---------------------------------------------------------------------- matching

def match_step(g: Graph, redex: int, tree: DefTree) -> Decision:
    """Walk the tree against the graph and decide what the redex needs."""
    redex = g.resolve(redex)
    while isinstance(tree, Branch):
        node = g.subnode(redex, tree.position)
        kind = g.sym(node).kind
        if kind is SymbolKind.FAIL:
            return FailMatch()
        if kind in (SymbolKind.OPERATION, SymbolKind.CHOICE):
            return NeedStep(node)
        child = tree.children.get(g.nodes[node].label, tree.default)
        if child is None:
            return FailMatch()
        tree = child
    rule = tree.rule
    bindings: dict[str, int] = {}
    args = g.args(redex)

    def bind(p: Pattern, n: int) -> None:
        n = g.resolve(n)
        if isinstance(p, PVar):
            if p.name is not None:
                bindings[p.name] = n
            return
        sym = g.sym(n)
        if isinstance(p, PLit):
            if sym.kind is not SymbolKind.NUMBER or sym.value != p.value:
                raise CorruptStore("leaf reached with non-matching literal")
            return
        if sym.name != p.name:
            raise CorruptStore("leaf reached with non-matching constructor")
        for q, a in zip(p.args, g.args(n)):
            bind(q, a)

    for p, a in zip(rule.params, args):
        bind(p, a)
    return RewriteTo(rule, bindings)


# ---------------------------------------------------------------------- dump

def pattern_text(p: Pattern) -> str:
    if isinstance(p, PVar):
        return p.name if p.name is not None else "_"
    if isinstance(p, PLit):
        return str(p.value)
    if not p.args:
        return p.name
    return "(" + " ".join([p.name] + [pattern_text(a) for a in p.args]) + ")"


def expr_text(e: Expr) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, ChoiceExpr):
        return f"({expr_text(e.left)} ? {expr_text(e.right)})"
    if isinstance(e, Call):
        from .symtab import BUILTIN_OPS
        if e.name in BUILTIN_OPS:
            return f"({expr_text(e.args[0])} {e.name} {expr_text(e.args[1])})"
        return "(" + " ".join([e.name] + [expr_text(a) for a in e.args]) + ")"
    return "?"


def dump_tree(op: str, tree: DefTree, symbols: SymbolTable) -> str:
    """Indented tree text; branch positions are marked `[pos k]` (1-based)."""
    lines = [f"{op}:"]

    def pos_text(path: Path) -> str:
        return ".".join(str(i + 1) for i in path)

    def walk(t: DefTree, indent: int) -> None:
        pad = "  " * indent
        if isinstance(t, Leaf):
            r = t.rule
            lhs = " ".join([r.op] + [pattern_text(p) for p in r.params])
            lines.append(f"{pad}rule: {lhs} = {expr_text(r.rhs)}")
            return
        lines.append(f"{pad}[pos {pos_text(t.position)}]")
        for key, child in t.children.items():
            lines.append(f"{pad}case {symbols.sym(key).name}:")
            walk(child, indent + 1)

    walk(tree, 1)
    return "\n".join(lines)
