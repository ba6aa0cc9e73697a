"""Mutable single-rooted acyclic term graph stored in an append-only table.

Each entry keeps argument edges, backpointers to its parents, monotone
min/max depth bounds, a conservative normal-form tag and an optional
forward pointer.  Rewrites mutate entries in place so every parent sees
the result; collapsing rewrites forward the redex to an existing node
instead of copying its entry.

Backpointers are kept exact for the live graph: whenever a node loses its
last parent, its own edges are detached recursively, so parent traversal
from any reachable node stays inside the reachable subgraph.  Depth bounds
are deliberately not refreshed on detachment (min only ever decreases,
max only ever increases).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import ArityMismatch, CorruptStore, CycleCreated
from .symtab import Symbol, SymbolKind, SymbolTable

# fresh nodes carry sentinel bounds until attached below a parent (or made root)
UNSET_MIN = 1 << 30
UNSET_MAX = -1


@dataclass
class NodeEntry:
    label: int
    args: list[int]
    backpointers: list[tuple[int, int]] = field(default_factory=list)
    min_depth: int = UNSET_MIN
    max_depth: int = UNSET_MAX
    nf_tag: bool = False
    forward: int | None = None


class Graph:
    def __init__(self, symbols: SymbolTable):
        self.symbols = symbols
        self.nodes: list[NodeEntry] = []
        self._root: int | None = None
        self._leaves: dict[int, int] = {}  # symbol id -> shared leaf node

    # ------------------------------------------------------------------ basics

    def entry(self, n: int) -> NodeEntry:
        return self.nodes[self.resolve(n)]

    def sym(self, n: int) -> Symbol:
        return self.symbols.sym(self.entry(n).label)

    def args(self, n: int) -> list[int]:
        """Resolved argument node ids."""
        return [self.resolve(a) for a in self.entry(n).args]

    def resolve(self, n: int) -> int:
        """Chase forward pointers to a live node, compressing the path."""
        e = self.nodes[n]
        if e.forward is None:
            return n
        seen = [n]
        cur = e.forward
        while self.nodes[cur].forward is not None:
            seen.append(cur)
            cur = self.nodes[cur].forward
            if len(seen) > len(self.nodes):
                raise CorruptStore("cycle of forward pointers")
        for m in seen:
            self.nodes[m].forward = cur
        return cur

    @property
    def root(self) -> int:
        if self._root is None:
            raise CorruptStore("graph has no root")
        return self.resolve(self._root)

    def set_root(self, n: int) -> None:
        n = self.resolve(n)
        self._root = n
        e = self.nodes[n]
        e.min_depth = 0
        e.max_depth = 0
        for a in e.args:
            self.update_depths(a, 0, 0)

    # ------------------------------------------------------------------ creation

    def _check_arity(self, sym: Symbol, nargs: int) -> None:
        if sym.kind is SymbolKind.CHOICE:
            return
        if sym.arity != nargs:
            raise ArityMismatch(
                f"{sym.name} expects {sym.arity} arguments, got {nargs}"
            )

    def _nf_for(self, sym: Symbol, args: list[int]) -> bool:
        if sym.kind is SymbolKind.NUMBER:
            return True
        if sym.kind is SymbolKind.CONSTRUCTOR:
            return all(self.entry(a).nf_tag for a in args)
        return False

    def add_node(self, label: int, args: list[int]) -> int:
        sym = self.symbols.sym(label)
        self._check_arity(sym, len(args))
        args = [self.resolve(a) for a in args]
        nid = len(self.nodes)
        self.nodes.append(NodeEntry(label, list(args), nf_tag=self._nf_for(sym, args)))
        for pos, a in enumerate(args):
            self.nodes[a].backpointers.append((nid, pos))
        return nid

    def number_node(self, value: int) -> int:
        return self.leaf(self.symbols.number(value))

    def leaf(self, label: int) -> int:
        """Shared node for a 0-ary symbol (numbers, nullary constructors)."""
        nid = self._leaves.get(label)
        if nid is None:
            nid = self.add_node(label, [])
            self._leaves[label] = nid
        return nid

    def _alloc(self, label: int) -> int:
        # raw node with no args yet; bubbling wires copies in a second phase
        nid = len(self.nodes)
        self.nodes.append(NodeEntry(label, []))
        return nid

    # ------------------------------------------------------------------ edges

    def _add_edge(self, parent: int, pos: int, child: int) -> None:
        self.nodes[parent].args[pos] = child
        self.nodes[child].backpointers.append((parent, pos))

    def _remove_bp(self, child: int, parent: int, pos: int) -> None:
        bps = self.nodes[child].backpointers
        try:
            bps.remove((parent, pos))
        except ValueError:
            raise CorruptStore(
                f"missing backpointer ({parent},{pos}) on node {child}"
            ) from None

    def _maybe_detach(self, n: int) -> None:
        """Detach a node that lost its last parent, recursively."""
        root = self.resolve(self._root) if self._root is not None else None
        work = [n]
        while work:
            m = self.resolve(work.pop())
            e = self.nodes[m]
            if e.backpointers or m == root:
                continue
            orphans = []
            for pos, a in enumerate(e.args):
                c = self.resolve(a)
                self._remove_bp(c, m, pos)
                orphans.append(c)
            e.args = []
            work.extend(orphans)

    def _reaches(self, start: int, target: int) -> bool:
        target = self.resolve(target)
        seen = set()
        stack = [start]
        while stack:
            n = self.resolve(stack.pop())
            if n == target:
                return True
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self.nodes[n].args)
        return False

    # ------------------------------------------------------------------ rewriting

    def overwrite(self, redex: int, label: int, args: list[int]) -> None:
        """Replace the redex entry in place; every parent observes the rewrite."""
        redex = self.resolve(redex)
        sym = self.symbols.sym(label)
        self._check_arity(sym, len(args))
        args = [self.resolve(a) for a in args]
        for a in args:
            if self._reaches(a, redex):
                raise CycleCreated(f"argument {a} reaches redex {redex}")
        e = self.nodes[redex]
        old = [self.resolve(a) for a in e.args]
        e.label = label
        e.args = list(args)
        for pos, a in enumerate(args):
            self.nodes[a].backpointers.append((redex, pos))
        for pos, c in enumerate(old):
            self._remove_bp(c, redex, pos)
        for c in old:
            self._maybe_detach(c)
        e.nf_tag = self._nf_for(sym, args)
        if e.min_depth != UNSET_MIN:
            for a in args:
                self.update_depths(a, e.min_depth, e.max_depth)

    def redirect(self, redex: int, target: int) -> None:
        """Forward the redex to an existing node (collapsing rewrite).

        Parent argument slots keep pointing at the redex and resolve lazily;
        the redex's backpointers move onto the target.
        """
        redex = self.resolve(redex)
        rt = self.resolve(target)
        if rt == redex:
            raise CycleCreated("redirect of a node to itself")
        if self._reaches(rt, redex):
            raise CycleCreated(f"target {rt} reaches redex {redex}")
        e = self.nodes[redex]
        self.nodes[rt].backpointers.extend(e.backpointers)
        e.backpointers = []
        e.forward = rt
        orphans = []
        for pos, a in enumerate(e.args):
            c = self.resolve(a)
            self._remove_bp(c, redex, pos)
            orphans.append(c)
        e.args = []
        for c in orphans:
            self._maybe_detach(c)
        self._maybe_detach(rt)
        if e.min_depth != UNSET_MIN:
            self.update_depths(rt, e.min_depth - 1, e.max_depth - 1)

    def set_choice_args(self, choice: int, new_args: list[int]) -> None:
        """Replace a variadic choice node's argument list (fail removal)."""
        choice = self.resolve(choice)
        e = self.nodes[choice]
        old = [self.resolve(a) for a in e.args]
        for pos, c in enumerate(old):
            self._remove_bp(c, choice, pos)
        new_args = [self.resolve(a) for a in new_args]
        e.args = list(new_args)
        for pos, a in enumerate(new_args):
            self.nodes[a].backpointers.append((choice, pos))
        for c in old:
            self._maybe_detach(c)

    def update_depths(self, n: int, parent_min: int, parent_max: int) -> None:
        """Relax depth bounds monotonically and propagate to children.

        Min only decreases, max only increases; removing a parent never
        updates the bounds (they stay a sound over-approximation).
        """
        work = [(n, parent_min, parent_max)]
        while work:
            m, pmin, pmax = work.pop()
            e = self.nodes[self.resolve(m)]
            changed = False
            if pmin + 1 < e.min_depth:
                e.min_depth = pmin + 1
                changed = True
            if pmax + 1 > e.max_depth:
                e.max_depth = pmax + 1
                changed = True
            if changed:
                for a in e.args:
                    work.append((a, e.min_depth, e.max_depth))

    # ------------------------------------------------------------------ traversal

    def reachable(self) -> list[int]:
        """Live nodes reachable from the root, in preorder."""
        out = []
        seen = set()
        stack = [self.root]
        while stack:
            n = self.resolve(stack.pop())
            if n in seen:
                continue
            seen.add(n)
            out.append(n)
            stack.extend(reversed(self.nodes[n].args))
        return out

    def parents(self, n: int) -> list[int]:
        """Distinct parent node ids, in backpointer order."""
        out = []
        seen = set()
        for p, _pos in self.nodes[self.resolve(n)].backpointers:
            if p not in seen:
                seen.add(p)
                out.append(p)
        return out

    def subnode(self, n: int, path: tuple[int, ...]) -> int:
        cur = self.resolve(n)
        for i in path:
            cur = self.resolve(self.nodes[cur].args[i])
        return cur

    # ------------------------------------------------------------------ checking

    def check_invariants(self) -> list[str]:
        """Verify the graph conditions on the reachable subgraph.

        Returns a list of violation descriptions; empty means pass.
        Acyclicity is checked first so the remaining passes cannot hang
        on a corrupted store.
        """
        out = []
        if self._root is None:
            return ["no root set"]
        try:
            root = self.root
        except CorruptStore as exc:
            return [str(exc)]

        # acyclicity over resolved edges (iterative three-color DFS)
        WHITE, GREY, BLACK = 0, 1, 2
        color: dict[int, int] = {}
        stack = [(root, False)]
        cyclic = False
        while stack and not cyclic:
            n, done = stack.pop()
            n = self.resolve(n)
            if done:
                color[n] = BLACK
                continue
            st = color.get(n, WHITE)
            if st == GREY:
                continue
            if st == BLACK:
                continue
            color[n] = GREY
            stack.append((n, True))
            for a in self.nodes[n].args:
                a = self.resolve(a)
                st = color.get(a, WHITE)
                if st == GREY:
                    out.append(f"cycle through node #{a}")
                    cyclic = True
                    break
                if st == WHITE:
                    stack.append((a, False))
        if cyclic:
            return out

        reach = self.reachable()
        rset = set(reach)

        # arity per live node
        for n in reach:
            e = self.nodes[n]
            sym = self.symbols.sym(e.label)
            if sym.kind is not SymbolKind.CHOICE and len(e.args) != sym.arity:
                out.append(
                    f"arity violation at #{n}: {sym.name} has {len(e.args)} args"
                )

        # edge/backpointer duality, with multiplicity, modulo forwarding
        incoming: dict[int, Counter] = {n: Counter() for n in reach}
        for p in reach:
            for pos, a in enumerate(self.nodes[p].args):
                c = self.resolve(a)
                if c in incoming:
                    incoming[c][(p, pos)] += 1
        for n in reach:
            have = Counter(self.nodes[n].backpointers)
            want = incoming[n]
            if have != want:
                out.append(
                    f"backpointer mismatch at #{n}: have {sorted(have.items())}, "
                    f"edges say {sorted(want.items())}"
                )
                continue
            for p, _pos in have:
                if p not in rset:
                    out.append(f"backpointer from unreachable parent #{p} on #{n}")
                elif self.nodes[p].forward is not None:
                    out.append(f"backpointer from forwarded node #{p} on #{n}")

        # variable uniqueness
        seen_vars: dict[int, int] = {}
        for n in reach:
            sym = self.symbols.sym(self.nodes[n].label)
            if sym.kind is SymbolKind.VARIABLE:
                if sym.id in seen_vars:
                    out.append(
                        f"variable {sym.name} labels nodes #{seen_vars[sym.id]} and #{n}"
                    )
                else:
                    seen_vars[sym.id] = n

        # depth soundness: recorded min <= true shortest, recorded max >= true longest
        short = {root: 0}
        queue = [root]
        while queue:
            nxt = []
            for n in queue:
                for a in self.nodes[n].args:
                    a = self.resolve(a)
                    if a not in short:
                        short[a] = short[n] + 1
                        nxt.append(a)
            queue = nxt
        longest = {n: 0 for n in reach}
        for n in self.topo_order(reach):
            for a in self.nodes[n].args:
                a = self.resolve(a)
                if longest[a] < longest[n] + 1:
                    longest[a] = longest[n] + 1
        for n in reach:
            e = self.nodes[n]
            if e.min_depth == UNSET_MIN:
                out.append(f"uninitialised depth on reachable node #{n}")
                continue
            if e.min_depth > short[n]:
                out.append(
                    f"min depth unsound at #{n}: recorded {e.min_depth} > true {short[n]}"
                )
            if e.max_depth < longest[n]:
                out.append(
                    f"max depth unsound at #{n}: recorded {e.max_depth} < true {longest[n]}"
                )

        # nf tag soundness (one-directional: tag set implies pure value subgraph)
        for n in reach:
            if self.nodes[n].nf_tag and not self._is_value_subgraph(n):
                out.append(f"nf tag set on non-value subgraph at #{n}")

        return out

    def topo_order(self, reach: list[int]) -> list[int]:
        """Parents before children (graph is acyclic when this is called)."""
        indeg = {n: 0 for n in reach}
        for n in reach:
            for a in self.nodes[n].args:
                indeg[self.resolve(a)] += 1
        order = [n for n in reach if indeg[n] == 0]
        i = 0
        while i < len(order):
            n = order[i]
            i += 1
            for a in self.nodes[n].args:
                a = self.resolve(a)
                indeg[a] -= 1
                if indeg[a] == 0:
                    order.append(a)
        return order

    def _is_value_subgraph(self, n: int) -> bool:
        stack = [n]
        seen = set()
        while stack:
            m = self.resolve(stack.pop())
            if m in seen:
                continue
            seen.add(m)
            kind = self.symbols.sym(self.nodes[m].label).kind
            if kind not in (SymbolKind.CONSTRUCTOR, SymbolKind.NUMBER):
                return False
            stack.extend(self.nodes[m].args)
        return True

    # ------------------------------------------------------------------ dump

    def dump(self) -> str:
        """One line per reachable node, ascending id, for golden tests."""
        lines = []
        for n in sorted(self.reachable()):
            e = self.nodes[n]
            sym = self.symbols.sym(e.label)
            argtxt = ", ".join(f"#{self.resolve(a)}" for a in e.args)
            bptxt = " ".join(f"(#{p},{pos})" for p, pos in e.backpointers)
            nf = "true" if e.nf_tag else "false"
            lines.append(
                f"#{n} {sym.name}({argtxt}) bp=[{bptxt}] "
                f"depth=[{e.min_depth},{e.max_depth}] nf={nf}"
            )
        return "\n".join(lines)
