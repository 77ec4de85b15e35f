"""Noncommutative polynomial expressions in named generators.

Syntax::

    expr   := term (('+' | '-') term)*
    term   := [number] factor*
    factor := atom ('*' | '^' int)*
    atom   := name | '1' | '(' expr ')'

Juxtaposition (whitespace) is multiplication and a postfix ``*`` is the
adjoint, so ``"V* V"`` and ``"V*V"`` both mean V*V.  Numbers may carry an
``i``/``j`` suffix for imaginary coefficients, e.g. ``"0.5i x - 0.5i x*"``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

from .errors import ParseError

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?[ij]?|\.\d+[ij]?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()]))")


@dataclass(frozen=True)
class Gen:
    name: str


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Adj:
    arg: "Node"


@dataclass(frozen=True)
class Prod:
    factors: tuple["Node", ...]


@dataclass(frozen=True)
class Sum:
    terms: tuple[tuple[complex, "Node"], ...]


Node = Union[Gen, One, Adj, Prod, Sum]


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r}", path=f"col {pos}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expr(self) -> Node:
        terms = []
        sign = 1.0
        kind, val = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1.0 if val == "-" else 1.0
        while True:
            coef, node = self.term()
            terms.append((sign * coef, node))
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                sign = -1.0 if val == "-" else 1.0
                continue
            break
        return terms[0][1] if len(terms) == 1 and terms[0][0] == 1 else Sum(tuple(terms))

    def term(self) -> tuple[complex, Node]:
        coef = 1.0 + 0j
        kind, val = self.peek()
        explicit = False
        if kind == "num":
            self.take()
            coef = complex(val.replace("i", "j")) if val[-1] in "ij" else complex(float(val))
            explicit = True
        factors = []
        while True:
            kind, val = self.peek()
            if kind == "name" or (kind == "op" and val == "("):
                factors.append(self.factor())
            else:
                break
        if not factors:
            if not explicit:
                raise ParseError("expected a term", path=f"token {self.i}")
            return coef, One()
        return coef, factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def factor(self) -> Node:
        kind, val = self.take()
        if kind == "name":
            node: Node = Gen(val)
        else:
            node = self.expr()
            kind, val = self.take()
            if val != ")":
                raise ParseError("unbalanced parenthesis", path=f"token {self.i}")
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                node = Adj(node)
            elif kind == "op" and val == "^":
                self.take()
                kind, val = self.take()
                if kind != "num" or not val.isdigit() or int(val) < 1:
                    raise ParseError("exponent must be a positive integer", path=f"token {self.i}")
                node = Prod((node,) * int(val))
            else:
                return node


def parse_word(text: str) -> Node:
    """Parse ``text`` into an expression tree."""
    p = _Parser(text)
    if not p.toks:
        raise ParseError("empty expression")
    node = p.expr()
    if p.i != len(p.toks):
        raise ParseError(f"trailing input {p.toks[p.i][1]!r}", path=f"token {p.i}")
    return node


def names_in(node: Node) -> set[str]:
    if isinstance(node, Gen):
        return {node.name}
    if isinstance(node, Adj):
        return names_in(node.arg)
    if isinstance(node, Prod):
        return set().union(*(names_in(f) for f in node.factors))
    if isinstance(node, Sum):
        return set().union(*(names_in(n) for _, n in node.terms))
    return set()


def evaluate(node: Node | str, env: Mapping[str, object], unit, adjoint: Callable = lambda x: x.H):
    """Evaluate a word on objects supporting ``+``, scalar ``*`` and ``@``."""
    if isinstance(node, str):
        node = parse_word(node)
    if isinstance(node, One):
        return unit
    if isinstance(node, Gen):
        if node.name == "1":
            return unit
        if node.name not in env:
            raise ParseError(f"unknown generator {node.name!r}")
        return env[node.name]
    if isinstance(node, Adj):
        return adjoint(evaluate(node.arg, env, unit, adjoint))
    if isinstance(node, Prod):
        out = evaluate(node.factors[0], env, unit, adjoint)
        for f in node.factors[1:]:
            out = out @ evaluate(f, env, unit, adjoint)
        return out
    total = None
    for coef, sub in node.terms:
        val = coef * evaluate(sub, env, unit, adjoint)
        total = val if total is None else total + val
    return total
