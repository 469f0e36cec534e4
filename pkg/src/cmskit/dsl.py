"""The .cms text format: expressions, vertex-set predicates and system files.

Grammar (one declaration per line, '#' starts a comment)::

    system NAME
    dim INT
    metric l1|l2|linf
    vertices INT
    vertexset INT = <cmp> {and|or <cmp>}
    representative INT = (<const>, ...)
    edge ID : INT -> INT map (<expr>, ...) prob <expr>
    delta <const>
    rate <const>

Expressions support + - * / ^ (constant non-negative integer exponents),
unary minus, and sin cos exp log abs min max norm1 norm2. Variables are
x1..xd, with aliases x, y, z when d <= 3.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, DSLSyntaxError, SemanticError

FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "abs": 1,
    "min": None, "max": None, "norm1": None, "norm2": None,
}
ALIASES = {"x": 1, "y": 2, "z": 3}


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    parts: tuple


Predicate = Union[Compare, BoolOp]


@dataclass
class EdgeSpec:
    id: str
    source: int
    target: int
    map: tuple
    prob: Expr


@dataclass
class SystemSpec:
    name: str
    dim: int
    metric: str
    vertex_count: int
    vertexsets: dict
    representatives: dict
    edges: list
    delta: float
    rate: Optional[float] = None
    source_text: Optional[str] = field(default=None, repr=False, compare=False)


# --- lexer -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*|\d+[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<=|>=|[-+*/^(),:=<>])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, pos - line_start + 1))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token], dim: Optional[int] = None):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        shown = tok.text if tok.kind != "newline" else "end of line"
        raise DSLSyntaxError(f"{msg}, got {shown or 'end of input'!r}", tok.line, tok.col)

    def accept(self, text) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.pos += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def expect_kind(self, kind) -> Token:
        tok = self.tok
        if tok.kind != kind:
            self.error(f"expected {kind}")
        self.pos += 1
        return tok

    def expect_int(self) -> int:
        tok = self.expect_kind("num")
        if not tok.text.isdigit():
            self.error("expected an integer", tok)
        return int(tok.text)

    # expressions
    def expr(self) -> Expr:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            paren = self.accept("(")
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                self.error("exponent must be a non-negative integer constant")
            self.pos += 1
            if paren:
                self.expect(")")
            return Pow(base, int(tok.text))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.pos += 1
            if tok.text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[tok.text]
                if arity is not None and len(args) != arity:
                    raise SemanticError(
                        f"line {tok.line}: {tok.text} takes {arity} argument(s), got {len(args)}"
                    )
                return Call(tok.text, tuple(args))
            return self.variable(tok)
        self.error("expected an expression")

    def variable(self, tok: Token) -> Var:
        name = tok.text
        if re.fullmatch(r"x\d+", name):
            index = int(name[1:])
        elif name in ALIASES and (self.dim is None or self.dim <= 3):
            index = ALIASES[name]
        else:
            raise SemanticError(f"line {tok.line}, column {tok.col}: unknown variable {name!r}")
        if index < 1 or (self.dim is not None and index > self.dim):
            raise SemanticError(
                f"line {tok.line}, column {tok.col}: variable {name!r} outside dimension {self.dim}"
            )
        return Var(index)

    def comparison(self) -> Compare:
        left = self.expr()
        tok = self.tok
        if tok.text not in ("<=", ">=", "<", ">"):
            self.error("expected a comparison operator")
        self.pos += 1
        return Compare(tok.text, left, self.expr())

    def predicate(self) -> Predicate:
        # 'and' binds tighter than 'or'
        alternatives = []
        conj = [self.comparison()]
        while self.tok.kind == "ident" and self.tok.text in ("and", "or"):
            word = self.tok.text
            self.pos += 1
            if word == "and":
                conj.append(self.comparison())
            else:
                alternatives.append(conj[0] if len(conj) == 1 else BoolOp("and", tuple(conj)))
                conj = [self.comparison()]
        alternatives.append(conj[0] if len(conj) == 1 else BoolOp("and", tuple(conj)))
        return alternatives[0] if len(alternatives) == 1 else BoolOp("or", tuple(alternatives))

    def constant(self) -> float:
        start = self.tok
        node = self.expr()
        if _has_vars(node):
            raise SemanticError(f"line {start.line}: expected a constant, found variables")
        return compile_scalar(node)(())

    def end_of_line(self):
        if self.tok.kind not in ("newline", "eof"):
            self.error("expected end of line")


def _has_vars(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Neg):
        return _has_vars(node.operand)
    if isinstance(node, Pow):
        return _has_vars(node.base)
    if isinstance(node, BinOp):
        return _has_vars(node.left) or _has_vars(node.right)
    if isinstance(node, Call):
        return any(_has_vars(a) for a in node.args)
    if isinstance(node, Compare):
        return _has_vars(node.left) or _has_vars(node.right)
    return any(_has_vars(p) for p in node.parts)


def parse_expr(text: str, dim: Optional[int] = None) -> Expr:
    p = _Parser([t for t in tokenize(text) if t.kind != "newline"], dim)
    node = p.expr()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return node


def parse_predicate(text: str, dim: Optional[int] = None) -> Predicate:
    p = _Parser([t for t in tokenize(text) if t.kind != "newline"], dim)
    node = p.predicate()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return node


def _split_lines(tokens: list[Token]) -> list[list[Token]]:
    lines, cur = [], []
    for t in tokens:
        if t.kind in ("newline", "eof"):
            if cur:
                lines.append(cur + [Token("eof", "", t.line, t.col)])
            cur = []
        else:
            cur.append(t)
    return lines


def parse_system(text: str) -> SystemSpec:
    """Parse and statically check a .cms system description."""
    lines = _split_lines(tokenize(text))
    if not lines:
        raise DSLSyntaxError("empty system file", 1, 1)
    head = _Parser(lines[0])
    if not head.accept("system"):
        head.error("file must start with 'system NAME'")
    name = head.expect_kind("ident").text
    head.end_of_line()

    # dim must be known before expressions are parsed
    dim = None
    for toks in lines[1:]:
        if toks[0].text == "dim":
            p = _Parser(toks)
            p.pos = 1
            dim = p.expect_int()
            p.end_of_line()
            break
    if dim is None:
        raise SemanticError("missing required declaration 'dim'")
    if dim < 1:
        raise SemanticError("dim must be positive")

    seen = set()
    metric = vertex_count = delta = rate = None
    vertexsets, reps, edges = {}, {}, []
    for toks in lines[1:]:
        p = _Parser(toks, dim)
        kw = p.tok
        if kw.kind != "ident":
            p.error("expected a declaration keyword")
        p.pos += 1
        key = kw.text
        if key in ("dim", "metric", "vertices", "delta", "rate", "system"):
            if key in seen:
                raise SemanticError(f"line {kw.line}: duplicate declaration {key!r}")
            seen.add(key)
        if key == "dim":
            p.expect_int()
        elif key == "metric":
            tag = p.expect_kind("ident")
            if tag.text not in ("l1", "l2", "linf"):
                raise SemanticError(f"line {tag.line}: unknown metric {tag.text!r}")
            metric = tag.text
        elif key == "vertices":
            vertex_count = p.expect_int()
            if vertex_count < 1:
                raise SemanticError(f"line {kw.line}: vertices must be positive")
        elif key == "vertexset":
            v = p.expect_int()
            p.expect("=")
            if v in vertexsets:
                raise SemanticError(f"line {kw.line}: vertexset {v} declared twice")
            vertexsets[v] = p.predicate()
        elif key == "representative":
            v = p.expect_int()
            p.expect("=")
            p.expect("(")
            coords = [p.constant()]
            while p.accept(","):
                coords.append(p.constant())
            p.expect(")")
            if v in reps:
                raise SemanticError(f"line {kw.line}: representative {v} declared twice")
            if len(coords) != dim:
                raise SemanticError(
                    f"line {kw.line}: representative {v} has {len(coords)} coordinates, dim is {dim}"
                )
            reps[v] = tuple(coords)
        elif key == "edge":
            tok = p.tok
            if tok.kind not in ("ident", "num"):
                p.error("expected an edge id")
            p.pos += 1
            p.expect(":")
            src = p.expect_int()
            p.expect("->")
            tgt = p.expect_int()
            p.expect("map")
            p.expect("(")
            comps = [p.expr()]
            while p.accept(","):
                comps.append(p.expr())
            p.expect(")")
            if len(comps) != dim:
                raise SemanticError(
                    f"line {kw.line}: edge {tok.text} map has {len(comps)} components, dim is {dim}"
                )
            p.expect("prob")
            edges.append(EdgeSpec(tok.text, src, tgt, tuple(comps), p.expr()))
        elif key == "delta":
            delta = p.constant()
        elif key == "rate":
            rate = p.constant()
        else:
            raise DSLSyntaxError(f"unknown declaration {key!r}", kw.line, kw.col)
        p.end_of_line()

    for required, value in (("metric", metric), ("vertices", vertex_count), ("delta", delta)):
        if value is None:
            raise SemanticError(f"missing required declaration {required!r}")
    if not 0 < delta < 1:
        raise SemanticError(f"delta must lie in (0, 1), got {delta}")
    if rate is not None and not 0 < rate < 1:
        raise SemanticError(f"rate must lie in (0, 1), got {rate}")
    if not edges:
        raise SemanticError("a system needs at least one edge")
    for v in list(vertexsets) + list(reps):
        if not 1 <= v <= vertex_count:
            raise SemanticError(f"vertex {v} outside 1..{vertex_count}")
    for v in range(1, vertex_count + 1):
        if v not in vertexsets:
            raise SemanticError(f"missing vertexset for vertex {v}")
        if v not in reps:
            raise SemanticError(f"missing representative for vertex {v}")
        if not compile_predicate(vertexsets[v])(reps[v]):
            raise SemanticError(f"representative {reps[v]} lies outside vertexset {v}")

    spec = SystemSpec(name, dim, metric, vertex_count, vertexsets, reps, edges, delta, rate, text)
    spec_graph(spec)  # raises SemanticError on bad ranges, duplicates, non-surjective i
    return spec


def spec_graph(spec: SystemSpec):
    from .graph import DirectedMultigraph, Edge

    return DirectedMultigraph(spec.vertex_count, tuple(Edge(e.id, e.source, e.target) for e in spec.edges))


# --- canonical printer -----------------------------------------------------

def format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def print_expr(node: Expr) -> str:
    if isinstance(node, Num):
        return format_number(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{print_expr(node.operand)})"
    if isinstance(node, Pow):
        return f"({print_expr(node.base)}^{node.exponent})"
    if isinstance(node, BinOp):
        return f"({print_expr(node.left)} {node.op} {print_expr(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(print_expr(a) for a in node.args)})"
    raise TypeError(node)


def print_predicate(node: Predicate) -> str:
    if isinstance(node, Compare):
        return f"{print_expr(node.left)} {node.op} {print_expr(node.right)}"
    return f" {node.op} ".join(print_predicate(p) for p in node.parts)


def print_system(spec: SystemSpec) -> str:
    out = [f"system {spec.name}", f"dim {spec.dim}", f"metric {spec.metric}", f"vertices {spec.vertex_count}"]
    for v in sorted(spec.vertexsets):
        out.append(f"vertexset {v} = {print_predicate(spec.vertexsets[v])}")
    for v in sorted(spec.representatives):
        coords = ", ".join(format_number(c) for c in spec.representatives[v])
        out.append(f"representative {v} = ({coords})")
    for e in spec.edges:
        comps = ", ".join(print_expr(c) for c in e.map)
        out.append(f"edge {e.id} : {e.source} -> {e.target} map ({comps}) prob {print_expr(e.prob)}")
    out.append(f"delta {format_number(spec.delta)}")
    if spec.rate is not None:
        out.append(f"rate {format_number(spec.rate)}")
    return "\n".join(out) + "\n"


# --- evaluation ------------------------------------------------------------

def _checked_log(v):
    if v <= 0:
        raise DomainError(f"log of non-positive value {v}")
    return math.log(v)


def _checked_div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _vec_log(v):
    if np.any(v <= 0):
        raise DomainError("log of non-positive value")
    return np.log(v)


def _vec_div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DomainError("division by zero")
    return a / b


def _fold(op, args):
    acc = args[0]
    for a in args[1:]:
        acc = op(acc, a)
    return acc


_SCALAR = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "log": _checked_log, "abs": abs,
    "min": lambda *a: _fold(min, a), "max": lambda *a: _fold(max, a),
    "norm1": lambda *a: _fold(lambda s, t: s + t, [abs(v) for v in a]),
    "norm2": lambda *a: math.sqrt(_fold(lambda s, t: s + t, [v * v for v in a])),
}
_VECTOR = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": _vec_log, "abs": np.abs,
    "min": lambda *a: _fold(np.minimum, a), "max": lambda *a: _fold(np.maximum, a),
    "norm1": lambda *a: _fold(lambda s, t: s + t, [np.abs(v) for v in a]),
    "norm2": lambda *a: np.sqrt(_fold(lambda s, t: s + t, [v * v for v in a])),
}


def _build(node, lib, div, var):
    """Turn an AST into a closure of one argument (the point)."""
    if isinstance(node, Num):
        c = node.value
        return lambda p: c
    if isinstance(node, Var):
        return var(node.index - 1)
    if isinstance(node, Neg):
        f = _build(node.operand, lib, div, var)
        return lambda p: -f(p)
    if isinstance(node, Pow):
        f = _build(node.base, lib, div, var)
        n = node.exponent
        if n == 0:
            return lambda p: 1.0
        if n == 1:
            return f

        def power(p):
            b = f(p)
            acc = b
            for _ in range(n - 1):
                acc = acc * b
            return acc
        return power
    if isinstance(node, BinOp):
        f = _build(node.left, lib, div, var)
        g = _build(node.right, lib, div, var)
        if node.op == "+":
            return lambda p: f(p) + g(p)
        if node.op == "-":
            return lambda p: f(p) - g(p)
        if node.op == "*":
            return lambda p: f(p) * g(p)
        return lambda p: div(f(p), g(p))
    if isinstance(node, Call):
        fn = lib[node.name]
        args = [_build(a, lib, div, var) for a in node.args]
        if len(args) == 1:
            a0 = args[0]
            return lambda p: fn(a0(p))
        return lambda p: fn(*[a(p) for a in args])
    raise TypeError(node)


def _scalar_var(i):
    return lambda p: p[i]


def _vector_var(i):
    return lambda P: P[:, i]


def compile_scalar(node: Expr) -> Callable:
    """Closure evaluating `node` at a point given as a tuple of floats."""
    return _build(node, _SCALAR, _checked_div, _scalar_var)


def compile_vector(node: Expr) -> Callable:
    """Closure evaluating `node` row-wise on an (m, d) array; returns shape (m,)."""
    inner = _build(node, _VECTOR, _vec_div, _vector_var)

    def f(P):
        out = inner(P)
        if np.ndim(out) == 0:
            out = np.full(P.shape[0], float(out))
        return out
    return f


_CMP = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
        "<": lambda a, b: a < b, ">": lambda a, b: a > b}


def compile_predicate(node: Predicate, vector: bool = False) -> Callable:
    comp = compile_vector if vector else compile_scalar
    if isinstance(node, Compare):
        f, g, cmp = comp(node.left), comp(node.right), _CMP[node.op]
        return lambda p: cmp(f(p), g(p))
    parts = [compile_predicate(q, vector) for q in node.parts]
    if vector:
        combine = np.logical_and if node.op == "and" else np.logical_or
        return lambda P: _fold(combine, [q(P) for q in parts])
    if node.op == "and":
        return lambda p: all(q(p) for q in parts)
    return lambda p: any(q(p) for q in parts)


def eval_expr(node: Expr, point) -> float:
    return compile_scalar(node)(tuple(float(c) for c in point))
