"""Parsing of programs (data declarations + rewrite rules) and goals.

Program files are UTF-8 text with `--` line comments and one declaration
or rule per line; a line starting with whitespace continues the previous
line.  Goals are single expressions with optional `where` sharing:

    (1+X)+(X+2) where X = 0 ? 1

Operator precedence, loosest first: `?` (right associative), then
`==`/`<=`, then `+`/`-`, then `*`//`/`; application binds tightest.
Identifiers are alphanumeric; constructors must be declared with a
`data` line, every other identifier in a rule left-hand side is a
variable, and `_` is the anonymous variable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    ArityMismatch,
    NonLinearLhs,
    ParseError,
    UnboundWhereName,
    UnknownIdentifier,
)
from .graphstore import Graph
from .symtab import BUILTIN_OPS, SymbolKind, SymbolTable

KEYWORDS = ("data", "where")


# ---------------------------------------------------------------------- AST

class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: int


@dataclass(frozen=True)
class Ref(Expr):
    name: str


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class ChoiceExpr(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Where(Expr):
    body: Expr
    bindings: tuple[tuple[str, Expr], ...]


class Pattern:
    pass


@dataclass(frozen=True)
class PVar(Pattern):
    name: str | None  # None for the anonymous variable


@dataclass(frozen=True)
class PCon(Pattern):
    name: str
    args: tuple[Pattern, ...]


@dataclass(frozen=True)
class PLit(Pattern):
    value: int


@dataclass
class Rule:
    op: str
    params: tuple[Pattern, ...]
    rhs: Expr
    source: str = "<rule>"
    line: int = 0

    def var_names(self) -> list[str]:
        out = []

        def walk(p):
            if isinstance(p, PVar):
                if p.name is not None:
                    out.append(p.name)
            elif isinstance(p, PCon):
                for q in p.args:
                    walk(q)

        for p in self.params:
            walk(p)
        return out


@dataclass
class Program:
    symbols: SymbolTable
    constructors: dict[str, int]                 # name -> arity
    operations: dict[str, int]                   # name -> arity
    rules: dict[str, list[Rule]] = field(default_factory=dict)

    def rules_for(self, op: str) -> list[Rule]:
        return self.rules[op]


# ---------------------------------------------------------------------- lexer

@dataclass(frozen=True)
class Token:
    kind: str  # ident | num | punct | us | eof
    text: str
    source: str
    line: int
    col: int


_PUNCT2 = ("==", "<=")
_PUNCT1 = "+-*/?=()|,"


def _tokenize(text: str, source: str, line: int) -> list[Token]:
    toks = []
    i = 0
    col = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t":
            i += 1
            col += 1
            continue
        start_col = col
        if text.startswith("--", i):
            break
        two = text[i:i + 2]
        if two in _PUNCT2:
            toks.append(Token("punct", two, source, line, start_col))
            i += 2
            col += 2
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("num", text[i:j], source, line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("ident", text[i:j], source, line, start_col))
            col += j - i
            i = j
            continue
        if c == "_":
            toks.append(Token("us", "_", source, line, start_col))
            i += 1
            col += 1
            continue
        if c in _PUNCT1:
            toks.append(Token("punct", c, source, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", source, line, col)
    toks.append(Token("eof", "", source, line, col))
    return toks


def _logical_lines(text: str, source: str):
    """Yield (line_number, text) with indented continuations joined."""
    pending = None
    pending_line = 0
    for no, raw in enumerate(text.splitlines(), start=1):
        cut = raw.find("--")
        line = raw[:cut] if cut >= 0 else raw
        if not line.strip():
            continue
        if line[0] in " \t" and pending is not None:
            pending += " " + line.strip()
            continue
        if pending is not None:
            yield pending_line, pending
        pending = line.rstrip()
        pending_line = no
    if pending is not None:
        yield pending_line, pending


# ---------------------------------------------------------------------- expressions

class _ExprParser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.source, t.line, t.col)

    def expect_punct(self, text: str) -> Token:
        t = self.peek()
        if t.kind == "punct" and t.text == text:
            return self.next()
        raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")

    def at_punct(self, *texts: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text in texts

    def at_keyword(self, kw: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text == kw

    # expression grammar, loosest binding first
    def expr(self) -> Expr:
        left = self.cmp()
        if self.at_punct("?"):
            self.next()
            return ChoiceExpr(left, self.expr())  # right associative
        return left

    def cmp(self) -> Expr:
        left = self.add()
        while self.at_punct("==", "<="):
            op = self.next().text
            left = Call(op, (left, self.add()))
        return left

    def add(self) -> Expr:
        left = self.mul()
        while self.at_punct("+", "-"):
            op = self.next().text
            left = Call(op, (left, self.mul()))
        return left

    def mul(self) -> Expr:
        left = self.app()
        while self.at_punct("*", "/"):
            op = self.next().text
            left = Call(op, (left, self.app()))
        return left

    def _at_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("num",):
            return True
        if t.kind == "ident" and t.text not in KEYWORDS:
            return True
        return t.kind == "punct" and t.text == "("

    def app(self) -> Expr:
        head = self.atom()
        args = []
        while self._at_atom():
            args.append(self.atom())
        if not args:
            return head
        if not isinstance(head, Ref):
            raise self.error("application head must be an identifier")
        return Call(head.name, tuple(args))

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return Num(int(t.text))
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.next()
            return Ref(t.text)
        if t.kind == "punct" and t.text == "(":
            self.next()
            e = self.expr()
            self.expect_punct(")")
            return e
        raise self.error(f"expected an expression, found {t.text or 'end of input'!r}")


def parse_goal(text: str) -> Expr:
    """Parse a goal expression with optional trailing `where` bindings."""
    toks = _tokenize(text, "<goal>", 1)
    p = _ExprParser(toks)
    body = p.expr()
    bindings: list[tuple[str, Expr]] = []
    if p.at_keyword("where"):
        p.next()
        while True:
            t = p.peek()
            if t.kind != "ident" or t.text in KEYWORDS:
                raise p.error("expected a binding name after 'where'")
            name = p.next().text
            p.expect_punct("=")
            bindings.append((name, p.expr()))
            if p.at_punct(","):
                p.next()
                continue
            break
        seen = set()
        for name, _ in bindings:
            if name in seen:
                raise ParseError(f"duplicate where binding {name!r}", "<goal>", 1, 1)
            seen.add(name)
    t = p.peek()
    if t.kind != "eof":
        raise p.error(f"unexpected trailing input {t.text!r}")
    if bindings:
        return Where(body, tuple(bindings))
    return body


# ---------------------------------------------------------------------- programs

def _parse_pattern_atom(p: _ExprParser, constructors: dict[str, int]) -> Pattern:
    t = p.peek()
    if t.kind == "num":
        p.next()
        return PLit(int(t.text))
    if t.kind == "us":
        p.next()
        return PVar(None)
    if t.kind == "ident" and t.text not in KEYWORDS:
        p.next()
        if t.text in constructors:
            arity = constructors[t.text]
            if arity != 0:
                raise ParseError(
                    f"constructor {t.text} takes {arity} arguments; "
                    "parenthesise the application",
                    t.source, t.line, t.col,
                )
            return PCon(t.text, ())
        return PVar(t.text)
    if t.kind == "punct" and t.text == "(":
        p.next()
        inner = _parse_pattern(p, constructors)
        p.expect_punct(")")
        return inner
    raise p.error(f"expected a pattern, found {t.text or 'end of input'!r}")


def _parse_pattern(p: _ExprParser, constructors: dict[str, int]) -> Pattern:
    t = p.peek()
    if t.kind == "ident" and t.text in constructors and constructors[t.text] > 0:
        p.next()
        arity = constructors[t.text]
        args = [_parse_pattern_atom(p, constructors) for _ in range(arity)]
        return PCon(t.text, tuple(args))
    if t.kind == "ident" and t.text in constructors:
        p.next()
        return PCon(t.text, ())
    return _parse_pattern_atom(p, constructors)


def _check_linear(rule_vars: list[str], source, line) -> None:
    seen = set()
    for v in rule_vars:
        if v in seen:
            raise NonLinearLhs(f"variable {v} occurs twice in a left-hand side",
                               source, line)
        seen.add(v)


def _resolve_expr(e: Expr, env: dict[str, str], prog_ctx, source, line) -> None:
    """Validate identifiers and arities in a rule RHS or goal body.

    env maps locally bound names (LHS variables or where names) to "var".
    prog_ctx maps program symbols to ("con"|"op", arity).
    """
    if isinstance(e, Num):
        return
    if isinstance(e, Ref):
        if e.name in env:
            return
        info = prog_ctx.get(e.name)
        if info is None:
            raise UnknownIdentifier(f"unknown identifier {e.name!r}", source, line)
        _, arity = info
        if arity != 0:
            raise ArityMismatch(
                f"{e.name} expects {arity} arguments, got 0 ({source}:{line})"
            )
        return
    if isinstance(e, Call):
        if e.name in env:
            raise ParseError(f"{e.name} is not applicable", source, line)
        info = prog_ctx.get(e.name)
        if info is None:
            raise UnknownIdentifier(f"unknown identifier {e.name!r}", source, line)
        _, arity = info
        if arity != len(e.args):
            raise ArityMismatch(
                f"{e.name} expects {arity} arguments, got {len(e.args)} "
                f"({source}:{line})"
            )
        for a in e.args:
            _resolve_expr(a, env, prog_ctx, source, line)
        return
    if isinstance(e, ChoiceExpr):
        _resolve_expr(e.left, env, prog_ctx, source, line)
        _resolve_expr(e.right, env, prog_ctx, source, line)
        return
    raise ParseError("where bindings are only allowed at the goal level",
                     source, line)


def parse_sources(sources: list[tuple[str, str]]) -> Program:
    """Parse a sequence of (name, text) program sources into one Program."""
    symbols = SymbolTable()
    constructors: dict[str, int] = {}
    raw_rules: list[tuple[str, int, list[Token]]] = []

    for source, text in sources:
        for line_no, line in _logical_lines(text, source):
            toks = _tokenize(line, source, line_no)
            if toks[0].kind == "ident" and toks[0].text == "data":
                _parse_data_decl(toks, symbols, constructors)
            else:
                raw_rules.append((source, line_no, toks))

    # first pass over rules: operation names and arities from the left sides
    operations: dict[str, int] = {}
    pending = []
    for source, line_no, toks in raw_rules:
        p = _ExprParser(toks)
        t = p.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ParseError("a rule must start with an operation name",
                             source, line_no, t.col)
        opname = p.next().text
        if opname in constructors:
            raise ParseError(f"{opname} is a constructor, not an operation",
                             source, line_no)
        params = []
        while not p.at_punct("="):
            if p.peek().kind == "eof":
                raise ParseError("expected '=' in rule", source, line_no)
            params.append(_parse_pattern_atom(p, constructors))
        p.expect_punct("=")
        arity = len(params)
        if opname in operations and operations[opname] != arity:
            raise ArityMismatch(
                f"operation {opname} defined with {operations[opname]} and "
                f"{arity} parameters ({source}:{line_no})"
            )
        operations[opname] = arity
        pending.append((source, line_no, opname, params, p))

    for name, arity in operations.items():
        symbols.intern(name, SymbolKind.OPERATION, arity)

    prog_ctx = {name: ("con", arity) for name, arity in constructors.items()}
    for name, arity in operations.items():
        prog_ctx[name] = ("op", arity)
    for name in BUILTIN_OPS:
        prog_ctx[name] = ("op", 2)

    rules: dict[str, list[Rule]] = {name: [] for name in operations}
    for source, line_no, opname, params, p in pending:
        rule = Rule(opname, tuple(params), None, source, line_no)
        _check_linear(rule.var_names(), source, line_no)
        rhs = p.expr()
        t = p.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected trailing input {t.text!r}",
                             source, line_no, t.col)
        env = {v: "var" for v in rule.var_names()}
        _resolve_expr(rhs, env, prog_ctx, source, line_no)
        rule.rhs = rhs
        rules[opname].append(rule)

    return Program(symbols, constructors, operations, rules)


def parse_program(text: str, source: str = "<program>") -> Program:
    return parse_sources([(source, text)])


def _parse_data_decl(toks, symbols, constructors) -> None:
    p = _ExprParser(toks)
    p.next()  # data
    t = p.peek()
    if t.kind != "ident":
        raise p.error("expected a type name after 'data'")
    p.next()  # the type name only groups the declaration
    p.expect_punct("=")
    while True:
        t = p.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise p.error("expected a constructor name")
        name = p.next().text
        arity = 0
        while p.peek().kind in ("ident", "us") and p.peek().text not in KEYWORDS:
            p.next()  # argument slots only fix the arity
            arity += 1
        symbols.intern(name, SymbolKind.CONSTRUCTOR, arity)
        constructors[name] = arity
        if _at_bar(p):
            p.next()
            continue
        break
    t = p.peek()
    if t.kind != "eof":
        raise p.error(f"unexpected trailing input {t.text!r}")


def _at_bar(p: _ExprParser) -> bool:
    t = p.peek()
    return t.kind == "punct" and t.text == "|"


# ---------------------------------------------------------------------- graphs

def _ref_names(e: Expr, acc: set[str]) -> None:
    if isinstance(e, Ref):
        acc.add(e.name)
    elif isinstance(e, Call):
        for a in e.args:
            _ref_names(a, acc)
    elif isinstance(e, ChoiceExpr):
        _ref_names(e.left, acc)
        _ref_names(e.right, acc)


def build_graph(goal: Expr, prog: Program) -> Graph:
    """Build the initial term graph for a goal.

    Every occurrence of a where-bound name maps to the same node; later
    bindings may refer to earlier ones.  Bindings the body never reaches
    are not built (an unused choice must not leave parents behind).  Free
    identifiers are errors.
    """
    g = Graph(prog.symbols)
    bindings: tuple[tuple[str, Expr], ...] = ()
    body = goal
    if isinstance(goal, Where):
        body = goal.body
        bindings = goal.bindings

    used: set[str] = set()
    _ref_names(body, used)
    changed = True
    while changed:
        changed = False
        for name, expr in bindings:
            if name in used:
                before = len(used)
                _ref_names(expr, used)
                changed |= len(used) != before

    later = {name for name, _ in bindings}
    env: dict[str, int] = {}

    def build(e: Expr) -> int:
        if isinstance(e, Num):
            return g.number_node(e.value)
        if isinstance(e, Ref):
            if e.name in env:
                return env[e.name]
            sym = prog.symbols.lookup(e.name)
            if sym is None or sym.kind is SymbolKind.VARIABLE:
                if e.name in later:
                    raise UnboundWhereName(
                        f"{e.name} is bound later in the where clause", "<goal>"
                    )
                raise UnknownIdentifier(f"unknown identifier {e.name!r}", "<goal>")
            if sym.arity != 0:
                raise ArityMismatch(f"{e.name} expects {sym.arity} arguments, got 0")
            if sym.kind is SymbolKind.CONSTRUCTOR:
                return g.leaf(sym.id)
            return g.add_node(sym.id, [])  # each 0-ary operation occurrence is its own redex
        if isinstance(e, Call):
            if e.name in env:
                raise ParseError(f"{e.name} is not applicable", "<goal>")
            sym = prog.symbols.lookup(e.name)
            if sym is None or sym.kind is SymbolKind.VARIABLE:
                raise UnknownIdentifier(f"unknown identifier {e.name!r}", "<goal>")
            if sym.arity != len(e.args):
                raise ArityMismatch(
                    f"{e.name} expects {sym.arity} arguments, got {len(e.args)}"
                )
            return g.add_node(sym.id, [build(a) for a in e.args])
        if isinstance(e, ChoiceExpr):
            return g.add_node(
                prog.symbols.choice, [build(e.left), build(e.right)]
            )
        raise ParseError("nested where is not supported", "<goal>")

    for name, expr in bindings:
        if prog.symbols.lookup(name) is not None:
            raise ParseError(f"where binding {name!r} shadows a program symbol",
                             "<goal>")
        later.discard(name)
        if name in used:
            env[name] = build(expr)
    root = build(body)
    g.set_root(root)
    return g


def graph_to_goal(g: Graph) -> str:
    """Print a reachable subgraph as a goal with explicit where-sharing.

    Nodes with several parents become where bindings, so re-parsing the
    result reproduces the sharing structure.
    """
    # postorder so a shared node is bound before any shared node using it
    post: list[int] = []
    seen: set[int] = set()

    def visit(n: int) -> None:
        n = g.resolve(n)
        if n in seen:
            return
        seen.add(n)
        for a in g.args(n):
            visit(a)
        post.append(n)

    visit(g.root)
    shared = [
        n for n in post
        if n != g.root and len(g.nodes[n].backpointers) > 1
    ]
    names: dict[int, str] = {}
    for i, n in enumerate(shared):
        k = i
        while True:
            name = f"sh{k}"
            if g.symbols.lookup(name) is None:
                break
            k += len(shared) + 1
        names[n] = name

    def render(n: int, under_binding: int | None) -> str:
        n = g.resolve(n)
        if n in names and n != under_binding:
            return names[n]
        sym = g.sym(n)
        kids = [render(a, None) for a in g.args(n)]
        if sym.kind is SymbolKind.NUMBER:
            return sym.name
        if sym.kind is SymbolKind.CHOICE:
            out = kids[-1]
            for k in reversed(kids[:-1]):
                out = f"({k} ? {out})"
            return out
        if sym.name in BUILTIN_OPS:
            return f"({kids[0]} {sym.name} {kids[1]})"
        if not kids:
            return sym.name
        return "(" + " ".join([sym.name] + kids) + ")"

    body = render(g.root, None)
    if not names:
        return body
    parts = [f"{names[n]} = {render(n, n)}" for n in names]
    return f"{body} where " + ", ".join(parts)
