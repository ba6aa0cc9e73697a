"""bubblefl: a functional-logic interpreter over shared term graphs.

Non-deterministic choice is evaluated by hoisting a needed choice to its
least dominator (bubbling) instead of backtracking or copying the whole
graph.
"""
from .bubbling import BUBBLING, COPYING, bubble, code_choice, least_dominator, paths_to_root
from .engine import Evaluator, Mode, Outcome, enumerate_normal_forms, print_value
from .errors import BubbleError
from .graphstore import Graph
from .oracle import brute_dominator, enumerate_by_substitution
from .parser import Program, build_graph, parse_goal, parse_program, parse_sources
from .symtab import SymbolKind, SymbolTable

__all__ = [
    "BUBBLING",
    "COPYING",
    "BubbleError",
    "Evaluator",
    "Graph",
    "Mode",
    "Outcome",
    "Program",
    "SymbolKind",
    "SymbolTable",
    "brute_dominator",
    "bubble",
    "build_graph",
    "code_choice",
    "enumerate_by_substitution",
    "enumerate_normal_forms",
    "least_dominator",
    "parse_goal",
    "parse_program",
    "parse_sources",
    "paths_to_root",
    "print_value",
]
