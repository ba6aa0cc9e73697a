"""Interned table of signature symbols.

Every name used by a program (constructors, defined operations, variables,
numbers, plus the builtin choice and fail symbols) maps to exactly one
symbol id.  The table is filled while loading and is read-only during
evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DuplicateSymbol


class SymbolKind(Enum):
    OPERATION = "operation"
    CONSTRUCTOR = "constructor"
    NUMBER = "number"
    VARIABLE = "variable"
    CHOICE = "choice"
    FAIL = "fail"


@dataclass(frozen=True)
class Symbol:
    id: int
    name: str
    kind: SymbolKind
    arity: int
    value: int | None = None  # set for NUMBER symbols only

    def __str__(self):
        return self.name


#: names of the arithmetic/comparison operations the engine implements itself
BUILTIN_OPS = ("+", "-", "*", "/", "==", "<=")


class SymbolTable:
    def __init__(self):
        self._symbols: list[Symbol] = []
        self._by_name: dict[str, int] = {}
        self._numbers: dict[int, int] = {}
        # Choice prints as "?", fail as "fail".  Choice arity is variadic
        # and recorded per node, so the symbol itself says 0.
        self.choice = self._add("?", SymbolKind.CHOICE, 0)
        self.fail = self._add("fail", SymbolKind.FAIL, 0)
        for name in BUILTIN_OPS:
            self._add(name, SymbolKind.OPERATION, 2)

    def _add(self, name, kind, arity, value=None):
        sid = len(self._symbols)
        self._symbols.append(Symbol(sid, name, kind, arity, value))
        self._by_name[name] = sid
        return sid

    def intern(self, name: str, kind: SymbolKind, arity: int) -> int:
        """Return the id for (name, kind, arity), creating it on first use.

        A name may be interned once; asking again with a different kind or
        arity raises DuplicateSymbol.
        """
        if not name:
            raise DuplicateSymbol("empty symbol name")
        if arity < 0:
            raise DuplicateSymbol(f"negative arity for {name!r}")
        sid = self._by_name.get(name)
        if sid is not None:
            sym = self._symbols[sid]
            if sym.kind is kind and sym.arity == arity:
                return sid
            raise DuplicateSymbol(
                f"{name!r} already interned as {sym.kind.value}/{sym.arity}, "
                f"requested {kind.value}/{arity}"
            )
        return self._add(name, kind, arity)

    def number(self, value: int) -> int:
        """Canonical symbol id for an integer literal."""
        sid = self._numbers.get(value)
        if sid is None:
            sid = len(self._symbols)
            self._symbols.append(
                Symbol(sid, str(value), SymbolKind.NUMBER, 0, value)
            )
            self._numbers[value] = sid
        return sid

    def lookup(self, name: str) -> Symbol | None:
        sid = self._by_name.get(name)
        return self._symbols[sid] if sid is not None else None

    def sym(self, sid: int) -> Symbol:
        return self._symbols[sid]

    def __len__(self):
        return len(self._symbols)
