"""Expression language for generating processes ``X(t) = f(t, W(t))``.

Grammar (EBNF)::

    process  = expr { "," expr } ;
    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = primary [ "^" unary ] ;
    primary  = number | variable | func "(" expr ")" | "(" expr ")" ;
    variable = "t" | "w1" | ... | "wd" ;
    func     = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" | "tanh" ;

``^`` binds tightest and is right-associative; unary minus binds looser
than ``^`` so ``-2^2 == -4``.  There is no implicit multiplication.
Error positions are 0-based character offsets into the source text.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Expr",
    "ProcessKind",
    "ProcessSpec",
    "ExprError",
    "ExprLexError",
    "ExprSyntaxError",
    "ExprDimensionError",
    "ExprDomainError",
    "parse_process",
    "parse_expression",
    "eval_expr",
    "eval_process",
    "pretty",
    "variables_of",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "tanh")
BINARY_OPS = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}


# ----------------------------------------------------------------- errors --


class ExprError(ValueError):
    """Base class for expression errors; carries a 0-based offset."""

    kind = "expression error"

    def __init__(self, message: str, position: int):
        super().__init__(f"{self.kind} at position {position}: {message}")
        self.message = message
        self.position = position


class ExprLexError(ExprError):
    kind = "lexical error"


class ExprSyntaxError(ExprError):
    kind = "syntax error"


class ExprDimensionError(ExprError):
    kind = "dimension error"


class ExprDomainError(ArithmeticError):
    """Raised when evaluation leaves the domain of log, sqrt, div or pow.

    ``index`` is the multi-index of the first offending element of the
    operand array (``None`` for scalar evaluation).
    """

    def __init__(self, node: "Expr", reason: str, index: tuple[int, ...] | None = None):
        self.node = node
        self.reason = reason
        self.index = index
        where = f" (element {index})" if index is not None else ""
        super().__init__(
            f"domain error in '{pretty(node)}' at position {node.pos}: {reason}{where}"
        )


# -------------------------------------------------------------------- AST --


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = 0


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    arg: "Expr"
    pos: int = 0


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div, pow
    left: "Expr"
    right: "Expr"
    pos: int = 0


Expr = Union[Const, Var, Unary, Binary]


def structure(node: Expr):
    """Position-free nested tuple form, for structural comparison."""
    if isinstance(node, Const):
        return ("const", node.value)
    if isinstance(node, Var):
        return ("var", node.name)
    if isinstance(node, Unary):
        return (node.op, structure(node.arg))
    return (node.op, structure(node.left), structure(node.right))


def variables_of(node: Expr) -> set[str]:
    if isinstance(node, Const):
        return set()
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return variables_of(node.arg)
    return variables_of(node.left) | variables_of(node.right)


class ProcessKind(enum.Enum):
    DETERMINISTIC = "deterministic"
    MARKOV = "markov-functional"


@dataclass(frozen=True)
class ProcessSpec:
    """A d-dimensional generating process given componentwise by ASTs."""

    source: str
    components: tuple[Expr, ...]

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def kind(self) -> ProcessKind:
        for comp in self.components:
            if any(v.startswith("w") for v in variables_of(comp)):
                return ProcessKind.MARKOV
        return ProcessKind.DETERMINISTIC

    @property
    def is_deterministic(self) -> bool:
        return self.kind is ProcessKind.DETERMINISTIC

    def __str__(self) -> str:
        return ", ".join(pretty(c) for c in self.components)


# ------------------------------------------------------------------ lexer --

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, eof
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprLexError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(source)))
    return tokens


# ----------------------------------------------------------------- parser --


class _Parser:
    def __init__(self, source: str, variables: frozenset[str], max_w: int | None):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = variables
        self.max_w = max_w

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind != "op":
            found = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", self.tok.pos)
        return self.advance()

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            node = Binary(BINARY_OPS[op.text], node, self.term(), op.pos)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            node = Binary(BINARY_OPS[op.text], node, self.unary(), op.pos)
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.advance()
            return Unary("neg", self.unary(), op.pos)
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            op = self.advance()
            return Binary("pow", base, self.unary(), op.pos)
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text), tok.pos)
        if tok.kind == "ident":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(tok.text, arg, tok.pos)
            return self.variable(tok)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "eof":
            raise ExprSyntaxError("missing operand: unexpected end of input", tok.pos)
        raise ExprSyntaxError(f"missing operand before {tok.text!r}", tok.pos)

    def variable(self, tok: _Token) -> Var:
        name = tok.text
        m = re.fullmatch(r"w(\d+)", name)
        if m and "w" in self.variables:
            index = int(m.group(1))
            if self.max_w is None or not 1 <= index <= self.max_w:
                raise ExprDimensionError(
                    f"variable {name!r} outside w1..w{self.max_w}", tok.pos
                )
            return Var(name, tok.pos)
        if name in self.variables:
            return Var(name, tok.pos)
        raise ExprLexError(f"unknown identifier {name!r}", tok.pos)


def parse_expression(source: str, variables: Iterable[str] = ("u",)) -> Expr:
    """Parse a single expression over the given scalar variable names."""
    parser = _Parser(source, frozenset(variables), None)
    node = parser.expr()
    if parser.tok.kind != "eof":
        raise ExprSyntaxError(f"unexpected {parser.tok.text!r}", parser.tok.pos)
    return node


def parse_process(source: str, d: int) -> ProcessSpec:
    """Parse ``d`` comma-separated component expressions over ``t, w1..wd``."""
    if d < 1:
        raise ExprDimensionError(f"dimension must be positive, got {d}", 0)
    parser = _Parser(source, frozenset({"t", "w"}), d)
    components = [parser.expr()]
    while parser.tok.kind == "op" and parser.tok.text == ",":
        comma = parser.advance()
        if len(components) == d:
            raise ExprDimensionError(
                f"more than d={d} components", comma.pos
            )
        components.append(parser.expr())
    if parser.tok.kind != "eof":
        raise ExprSyntaxError(f"unexpected {parser.tok.text!r}", parser.tok.pos)
    if len(components) != d:
        raise ExprDimensionError(
            f"expected {d} components, got {len(components)}", len(source)
        )
    return ProcessSpec(source, tuple(components))


# --------------------------------------------------------- pretty printer --

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {v: k for k, v in BINARY_OPS.items()}


def _fmt_const(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"cannot print non-finite constant {value}")
    return repr(float(value))


def pretty(node: Expr) -> str:
    """Render with minimal parentheses; the result re-parses to the same tree."""
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op != "neg":
            return f"{node.op}({pretty(node.arg)})"
        inner = pretty(node.arg)
        if isinstance(node.arg, Binary) and _PREC[node.arg.op] < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    prec = _PREC[node.op]
    left, right = pretty(node.left), pretty(node.right)
    if node.op == "pow":
        # base must be atomic; exponent may be a unary or another pow
        if not isinstance(node.left, (Const, Var)) and not (
            isinstance(node.left, Unary) and node.left.op != "neg"
        ):
            left = f"({left})"
        if isinstance(node.right, Binary) and node.right.op != "pow":
            right = f"({right})"
        return f"{left}^{right}"
    if isinstance(node.left, Binary) and _PREC[node.left.op] < prec:
        left = f"({left})"
    if isinstance(node.right, Binary) and _PREC[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {_SYMBOL[node.op]} {right}"


# -------------------------------------------------------------- evaluator --


def _first_bad(mask) -> tuple[int, ...] | None:
    mask = np.asarray(mask)
    if not mask.any():
        return None
    return tuple(int(i) for i in np.argwhere(mask)[0])


def _check(node: Expr, bad, reason: str):
    idx = _first_bad(bad)
    if idx is not None:
        raise ExprDomainError(node, reason, idx or None)


def eval_expr(node: Expr, env: dict):
    """Evaluate ``node`` with numpy broadcasting over the arrays in ``env``."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        x = eval_expr(node.arg, env)
        if node.op == "neg":
            return np.negative(x)
        if node.op == "log":
            _check(node, np.asarray(x) <= 0, "log of non-positive value")
        elif node.op == "sqrt":
            _check(node, np.asarray(x) < 0, "sqrt of negative value")
        return getattr(np, node.op)(x)
    a = eval_expr(node.left, env)
    b = eval_expr(node.right, env)
    if node.op == "add":
        return np.add(a, b)
    if node.op == "sub":
        return np.subtract(a, b)
    if node.op == "mul":
        return np.multiply(a, b)
    if node.op == "div":
        a, b = np.broadcast_arrays(a, b)
        _check(node, b == 0, "division by zero")
        return np.divide(a, b)
    a, b = np.broadcast_arrays(a, b)
    _check(
        node,
        ((a < 0) & (b != np.floor(b))) | ((a == 0) & (b < 0)),
        "power outside real domain",
    )
    with np.errstate(over="ignore"):
        return np.power(a, b)


def eval_process(spec: ProcessSpec, t, w):
    """Evaluate all components at time(s) ``t`` and state(s) ``w``.

    ``w`` has trailing axis of length ``d``; the result has the broadcast
    shape of ``t`` and ``w[..., 0]`` with a trailing axis of length ``d``.
    Deterministic specs never read ``w``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != spec.d:
        raise ValueError(f"state has {w.shape[-1]} components, spec has d={spec.d}")
    env = {"t": np.asarray(t, dtype=float)}
    for j in range(spec.d):
        env[f"w{j + 1}"] = w[..., j]
    shape = np.broadcast_shapes(env["t"].shape, w.shape[:-1])
    out = np.empty(shape + (spec.d,))
    with np.errstate(over="ignore"):
        for j, comp in enumerate(spec.components):
            out[..., j] = eval_expr(comp, env)
    return out
