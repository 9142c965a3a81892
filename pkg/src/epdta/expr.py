"""Expression language for guards, assignments and clock constraints.

Concrete syntax (ASCII, with a few unicode aliases accepted on input)::

    bexpr   ::= bunary ('&' bunary)*
    bunary  ::= '~' bunary | 'tt' | 'ff' | boolvar | aexpr relop aexpr | '(' bexpr ')'
    relop   ::= '=' | '<=' | '<'
    aexpr   ::= term (('+' | '-') term)*
    term    ::= factor (('*' | '/' | '%') factor)*
    factor  ::= INT | '-' factor | intvar | table '(' aexpr (',' aexpr)* ')' | '(' aexpr ')'
    assign  ::= target '<-' (bexpr | aexpr) (',' target '<-' ...)*   | <empty>
    clock   ::= catom ('&' catom)*
    catom   ::= 'true' | 'false' | x cop INT | x '-' y cop INT
    cop     ::= '<' | '<=' | '=' | '>=' | '>'
    guard   ::= (catom | bunary) ('&' (catom | bunary))*

Identifiers are classified by the :class:`Declarations` they are parsed
against, so ``x >= 1 & ~b`` is a clock atom followed by a boolean atom when
``x`` is a clock and ``b`` a boolean variable.

Integer ``/`` truncates toward zero and ``%`` takes the sign of the dividend.
Table entries are exact rationals; ``+ - *`` are evaluated exactly and a
value is rounded to the nearest integer (ties away from zero) wherever an
integer is required: operands of ``/`` and ``%``, table arguments, integer
assignment targets and :func:`eval_int` results.  Comparisons are exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

__all__ = [
    "ExprError", "ParseError", "EvalError", "RangeError",
    "BoolConst", "BoolVar", "And", "Not", "Compare",
    "IntConst", "IntVar", "Apply", "Arith",
    "Assign", "Assignment", "ClockConst", "ClockCompare", "ClockAnd", "Guard",
    "FunctionTable", "Declarations",
    "parse", "parse_bool", "parse_arith", "parse_assignment", "parse_clock", "parse_guard",
    "to_text", "round_half_away", "eval_bool", "eval_int", "eval_value",
    "satisfies_clock", "satisfies", "apply_assignment", "reset", "advance",
    "clock_atoms", "is_integral", "variables_read",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, text: str = "", pos: int = -1):
        self.text = text
        self.pos = pos
        if pos >= 0:
            message = f"{message} at position {pos}"
        super().__init__(message)


class EvalError(ExprError):
    pass


class RangeError(EvalError):
    pass


# --- syntax trees ---------------------------------------------------------

@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class BoolVar:
    name: str


@dataclass(frozen=True)
class And:
    left: "BExpr"
    right: "BExpr"


@dataclass(frozen=True)
class Not:
    operand: "BExpr"


@dataclass(frozen=True)
class Compare:
    op: str  # '=', '<=', '<'
    left: "AExpr"
    right: "AExpr"


@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class IntVar:
    name: str


@dataclass(frozen=True)
class Apply:
    table: "FunctionTable"
    args: tuple

    @property
    def name(self) -> str:
        return self.table.name


@dataclass(frozen=True)
class Arith:
    op: str  # '+', '-', '*', '/', '%'
    left: "AExpr"
    right: "AExpr"


@dataclass(frozen=True)
class Assign:
    target: str
    value: Union["BExpr", "AExpr"]


@dataclass(frozen=True)
class Assignment:
    items: tuple = ()

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    @property
    def targets(self) -> tuple:
        return tuple(item.target for item in self.items)


@dataclass(frozen=True)
class ClockConst:
    value: bool


@dataclass(frozen=True)
class ClockCompare:
    op: str  # '<', '<=', '=', '>=', '>'
    clock: str
    other: str | None
    bound: int


@dataclass(frozen=True)
class ClockAnd:
    left: "ClockConstraint"
    right: "ClockConstraint"


@dataclass(frozen=True)
class Guard:
    """Conjunction of clock atoms and boolean expressions."""

    parts: tuple = ()

    @property
    def clock_parts(self) -> tuple:
        return tuple(p for p in self.parts if isinstance(p, (ClockConst, ClockCompare, ClockAnd)))

    @property
    def bool_parts(self) -> tuple:
        return tuple(p for p in self.parts if not isinstance(p, (ClockConst, ClockCompare, ClockAnd)))


BExpr = Union[BoolConst, BoolVar, And, Not, Compare]
AExpr = Union[IntConst, IntVar, Apply, Arith]
ClockConstraint = Union[ClockConst, ClockCompare, ClockAnd]

_CLOCK_TYPES = (ClockConst, ClockCompare, ClockAnd)


# --- tables and declarations ----------------------------------------------

@dataclass(frozen=True, eq=False)
class FunctionTable:
    """A named rectangular array of rationals over integer index ranges.

    ``bounds`` holds one inclusive ``(lo, hi)`` pair per axis; ``values`` is
    the row-major flattening of the array.
    """

    name: str
    bounds: tuple
    values: tuple

    def __post_init__(self):
        bounds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        values = tuple(Fraction(v) for v in self.values)
        if not bounds:
            raise ValueError(f"table {self.name!r} needs at least one axis")
        size = 1
        for lo, hi in bounds:
            if lo > hi:
                raise ValueError(f"table {self.name!r} has empty axis [{lo}, {hi}]")
            size *= hi - lo + 1
        if len(values) != size:
            raise ValueError(f"table {self.name!r} expects {size} entries, got {len(values)}")
        strides = []
        step = 1
        for lo, hi in reversed(bounds):
            strides.append(step)
            step *= hi - lo + 1
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_strides", tuple(reversed(strides)))
        object.__setattr__(self, "integral", all(v.denominator == 1 for v in values))

    @classmethod
    def from_nested(cls, name: str, bounds, rows) -> "FunctionTable":
        flat = []

        def walk(node, depth):
            if depth == len(bounds):
                flat.append(node)
            else:
                for item in node:
                    walk(item, depth + 1)

        walk(rows, 0)
        return cls(name, tuple(bounds), tuple(flat))

    @property
    def arity(self) -> int:
        return len(self.bounds)

    def __call__(self, *args: int) -> Fraction:
        if len(args) != len(self.bounds):
            raise EvalError(f"table {self.name} expects {len(self.bounds)} arguments, got {len(args)}")
        offset = 0
        for arg, (lo, hi), stride in zip(args, self.bounds, self._strides):
            if not lo <= arg <= hi:
                raise EvalError(f"table {self.name} applied outside its domain: {args}")
            offset += (arg - lo) * stride
        return self.values[offset]

    def __repr__(self):
        return f"FunctionTable({self.name!r}, bounds={self.bounds})"


@dataclass(frozen=True)
class Declarations:
    clocks: frozenset = frozenset()
    bools: frozenset = frozenset()
    ints: Mapping[str, tuple] = field(default_factory=dict)
    tables: Mapping[str, FunctionTable] = field(default_factory=dict)

    @classmethod
    def of(cls, clocks: Iterable[str] = (), bools: Iterable[str] = (),
           ints: Mapping[str, tuple] | Iterable[str] = (), tables: Iterable[FunctionTable] | Mapping = ()):
        if not isinstance(ints, Mapping):
            ints = {name: (-(2**63), 2**63 - 1) for name in ints}
        if isinstance(tables, Mapping):
            tables = dict(tables)
        else:
            tables = {t.name: t for t in tables}
        return cls(frozenset(clocks), frozenset(bools), dict(ints), tables)

    def kind(self, name: str) -> str | None:
        if name in self.clocks:
            return "clock"
        if name in self.bools:
            return "bool"
        if name in self.ints:
            return "int"
        if name in self.tables:
            return "table"
        return None


# --- lexer ----------------------------------------------------------------

_ALIASES = {"≤": "<=", "≥": ">=", "∧": "&", "¬": "~", "←": "<-", "−": "-"}
_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><-|<=|>=|[<>=&~+\-*/%(),]|[≤≥∧¬←−]))"
)
_RELOPS = ("=", "<=", "<")
_CLOCK_OPS = ("<", "<=", "=", ">=", ">")
_KEYWORDS = {"tt", "ff", "true", "false"}


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip():
                at = pos + len(rest) - len(rest.lstrip())
                raise ParseError(f"unexpected character {text[at]!r}", text, at)
            break
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "op":
            value = _ALIASES.get(value, value)
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, decls: Declarations):
        self.text = text
        self.decls = decls
        self.tokens = _tokenize(text)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, value: str, k: int = 0) -> bool:
        kind, text, _ = self.peek(k)
        return kind != "eof" and text == value and kind != "num"

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        if not self.at(value):
            self.fail(f"expected {value!r}")
        return self.advance()

    def fail(self, message: str, tok=None):
        kind, text, pos = tok or self.peek()
        got = "end of input" if kind == "eof" else repr(text)
        raise ParseError(f"{message}, got {got}", self.text, pos)

    def end(self):
        if self.peek()[0] != "eof":
            self.fail("expected end of input")

    def kind_of(self, tok) -> str | None:
        if tok[0] != "id" or tok[1] in _KEYWORDS:
            return None
        return self.decls.kind(tok[1])

    def identifier(self, expected: str):
        tok = self.peek()
        if tok[0] != "id":
            self.fail(f"expected {expected}")
        kind = self.kind_of(tok)
        if kind is None:
            raise ParseError(f"undeclared identifier {tok[1]!r}", self.text, tok[2])
        return tok, kind

    # boolean expressions
    def bexpr(self):
        node = self.bunary()
        while self.at("&"):
            self.advance()
            node = And(node, self.bunary())
        return node

    def bunary(self):
        if self.at("~"):
            self.advance()
            return Not(self.bunary())
        tok = self.peek()
        if tok[0] == "id" and tok[1] in ("tt", "ff"):
            self.advance()
            return BoolConst(tok[1] == "tt")
        if tok[0] == "id":
            kind = self.kind_of(tok)
            if kind == "bool":
                self.advance()
                return BoolVar(tok[1])
            if kind == "clock":
                raise ParseError(f"clock {tok[1]!r} used in a boolean expression", self.text, tok[2])
        if self.at("("):
            start = self.i
            try:
                return self.comparison()
            except ParseError as first:
                self.i = start
                self.advance()
                try:
                    node = self.bexpr()
                    self.expect(")")
                except ParseError as second:
                    raise (first if first.pos > second.pos else second) from None
                return node
        return self.comparison()

    def comparison(self):
        left = self.aexpr()
        tok = self.peek()
        if tok[0] != "op" or tok[1] not in _RELOPS:
            self.fail("expected one of = <= <")
        self.advance()
        return Compare(tok[1], left, self.aexpr())

    # arithmetic expressions
    def aexpr(self):
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance()[1]
            node = Arith(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at("*") or self.at("/") or self.at("%"):
            op = self.advance()[1]
            node = Arith(op, node, self.factor())
        return node

    def factor(self):
        tok = self.peek()
        if tok[0] == "num":
            self.advance()
            return IntConst(int(tok[1]))
        if self.at("-"):
            self.advance()
            if self.peek()[0] == "num":
                return IntConst(-int(self.advance()[1]))
            return Arith("-", IntConst(0), self.factor())
        if self.at("("):
            self.advance()
            node = self.aexpr()
            self.expect(")")
            return node
        tok, kind = self.identifier("an arithmetic operand")
        if kind == "int":
            self.advance()
            return IntVar(tok[1])
        if kind == "table":
            self.advance()
            table = self.decls.tables[tok[1]]
            self.expect("(")
            args = [self.aexpr()]
            while self.at(","):
                self.advance()
                args.append(self.aexpr())
            self.expect(")")
            if len(args) != table.arity:
                raise ParseError(
                    f"table {tok[1]!r} expects {table.arity} arguments, got {len(args)}", self.text, tok[2])
            return Apply(table, tuple(args))
        raise ParseError(f"{kind} {tok[1]!r} used in an arithmetic expression", self.text, tok[2])

    # clock constraints
    def catom(self):
        tok = self.peek()
        if tok[0] == "id" and tok[1] in ("true", "false"):
            self.advance()
            return ClockConst(tok[1] == "true")
        tok, kind = self.identifier("a clock")
        if kind != "clock":
            raise ParseError(f"{tok[1]!r} is not a clock", self.text, tok[2])
        self.advance()
        other = None
        if self.at("-"):
            self.advance()
            otok, okind = self.identifier("a clock")
            if okind != "clock":
                raise ParseError(f"{otok[1]!r} is not a clock", self.text, otok[2])
            self.advance()
            other = otok[1]
        op = self.peek()
        if op[0] != "op" or op[1] not in _CLOCK_OPS:
            self.fail("expected a clock comparison operator")
        self.advance()
        num = self.peek()
        if num[0] != "num":
            self.fail("expected a natural number")
        self.advance()
        return ClockCompare(op[1], tok[1], other, int(num[1]))

    def clock(self):
        node = self.catom()
        while self.at("&"):
            self.advance()
            node = ClockAnd(node, self.catom())
        return node

    def guard(self):
        parts = [self.gatom()]
        while self.at("&"):
            self.advance()
            parts.append(self.gatom())
        return Guard(tuple(parts))

    def gatom(self):
        tok = self.peek()
        if tok[0] == "id" and (tok[1] in ("true", "false") or self.kind_of(tok) == "clock"):
            return self.catom()
        return self.bunary()

    # assignments
    def assignment(self):
        items = []
        if self.peek()[0] == "eof":
            return Assignment(())
        while True:
            tok, kind = self.identifier("an assignment target")
            self.advance()
            self.expect("<-")
            if kind == "bool":
                items.append(Assign(tok[1], self.bexpr()))
            elif kind == "int":
                items.append(Assign(tok[1], self.aexpr()))
            else:
                raise ParseError(f"cannot assign to {kind} {tok[1]!r}", self.text, tok[2])
            if not self.at(","):
                break
            self.advance()
        return Assignment(tuple(items))


_EMPTY = Declarations()


def _run(method: str, text: str, decls: Declarations | None):
    parser = _Parser(text, decls or _EMPTY)
    node = getattr(parser, method)()
    parser.end()
    return node


def parse_bool(text: str, decls: Declarations | None = None) -> BExpr:
    return _run("bexpr", text, decls)


def parse_arith(text: str, decls: Declarations | None = None) -> AExpr:
    return _run("aexpr", text, decls)


def parse_assignment(text: str, decls: Declarations | None = None) -> Assignment:
    return _run("assignment", text, decls)


def parse_clock(text: str, decls: Declarations | None = None) -> ClockConstraint:
    return _run("clock", text, decls)


def parse_guard(text: str, decls: Declarations | None = None) -> Guard:
    return _run("guard", text, decls)


_KINDS = {
    "bool": parse_bool,
    "arith": parse_arith,
    "assignment": parse_assignment,
    "clock": parse_clock,
    "guard": parse_guard,
}


def parse(text: str, decls: Declarations | None = None, kind: str = "guard"):
    """Parse ``text`` as one syntactic category: bool, arith, assignment, clock or guard."""
    try:
        return _KINDS[kind](text, decls)
    except KeyError:
        raise ValueError(f"unknown expression kind {kind!r}") from None


# --- printing -------------------------------------------------------------

def to_text(node) -> str:
    """Render a tree in the concrete syntax; ``parse`` inverts this."""
    if isinstance(node, BoolConst):
        return "tt" if node.value else "ff"
    if isinstance(node, (BoolVar, IntVar)):
        return node.name
    if isinstance(node, And):
        right = to_text(node.right)
        if isinstance(node.right, And):
            right = f"({right})"
        return f"{to_text(node.left)} & {right}"
    if isinstance(node, Not):
        inner = to_text(node.operand)
        if isinstance(node.operand, (And, Compare)):
            inner = f"({inner})"
        return f"~{inner}"
    if isinstance(node, Compare):
        return f"{to_text(node.left)} {node.op} {to_text(node.right)}"
    if isinstance(node, IntConst):
        return str(node.value)
    if isinstance(node, Apply):
        return f"{node.table.name}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, Arith):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Assign):
        return f"{node.target} <- {to_text(node.value)}"
    if isinstance(node, Assignment):
        return ", ".join(to_text(item) for item in node.items)
    if isinstance(node, ClockConst):
        return "true" if node.value else "false"
    if isinstance(node, ClockCompare):
        lhs = node.clock if node.other is None else f"{node.clock} - {node.other}"
        return f"{lhs} {node.op} {node.bound}"
    if isinstance(node, ClockAnd):
        return f"{to_text(node.left)} & {to_text(node.right)}"
    if isinstance(node, Guard):
        if not node.parts:
            return "true"
        out = []
        for part in node.parts:
            text = to_text(part)
            out.append(f"({text})" if isinstance(part, And) else text)
        return " & ".join(out)
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation -----------------------------------------------------------

def round_half_away(x) -> int:
    """Nearest integer, ties away from zero."""
    if isinstance(x, int):
        return x
    x = Fraction(x)
    if x.denominator == 1:
        return x.numerator
    n = math.floor(abs(x) + Fraction(1, 2))
    return n if x > 0 else -n


def _idiv(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def _irem(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("remainder by zero")
    return a - b * _idiv(a, b)


def _lookup(iota: Mapping, name: str):
    try:
        return iota[name]
    except KeyError:
        raise EvalError(f"variable {name!r} is not defined") from None


def eval_value(alpha: AExpr, iota: Mapping):
    """Exact value of an arithmetic expression (an int or a Fraction)."""
    if isinstance(alpha, IntConst):
        return alpha.value
    if isinstance(alpha, IntVar):
        return _lookup(iota, alpha.name)
    if isinstance(alpha, Apply):
        value = alpha.table(*(round_half_away(eval_value(a, iota)) for a in alpha.args))
        return value.numerator if value.denominator == 1 else value
    if isinstance(alpha, Arith):
        left = eval_value(alpha.left, iota)
        right = eval_value(alpha.right, iota)
        op = alpha.op
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return _idiv(round_half_away(left), round_half_away(right))
        return _irem(round_half_away(left), round_half_away(right))
    raise TypeError(f"not an arithmetic expression: {alpha!r}")


def eval_int(alpha: AExpr, iota: Mapping) -> int:
    return round_half_away(eval_value(alpha, iota))


def eval_bool(beta: BExpr, iota: Mapping) -> bool:
    if isinstance(beta, BoolConst):
        return beta.value
    if isinstance(beta, BoolVar):
        return bool(_lookup(iota, beta.name))
    if isinstance(beta, And):
        return eval_bool(beta.left, iota) and eval_bool(beta.right, iota)
    if isinstance(beta, Not):
        return not eval_bool(beta.operand, iota)
    if isinstance(beta, Compare):
        left = eval_value(beta.left, iota)
        right = eval_value(beta.right, iota)
        if beta.op == "=":
            return left == right
        if beta.op == "<=":
            return left <= right
        return left < right
    raise TypeError(f"not a boolean expression: {beta!r}")


def _cmp(op: str, a: int, b: int) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == "=":
        return a == b
    if op == ">=":
        return a >= b
    return a > b


def satisfies_clock(psi: ClockConstraint, nu: Mapping) -> bool:
    if isinstance(psi, ClockConst):
        return psi.value
    if isinstance(psi, ClockCompare):
        try:
            value = nu[psi.clock] - (nu[psi.other] if psi.other is not None else 0)
        except KeyError as exc:
            raise EvalError(f"clock {exc.args[0]!r} is not defined") from None
        return _cmp(psi.op, value, psi.bound)
    if isinstance(psi, ClockAnd):
        return satisfies_clock(psi.left, nu) and satisfies_clock(psi.right, nu)
    raise TypeError(f"not a clock constraint: {psi!r}")


def satisfies(g: Guard, iota: Mapping, nu: Mapping) -> bool:
    for part in g.parts:
        if isinstance(part, _CLOCK_TYPES):
            if not satisfies_clock(part, nu):
                return False
        elif not eval_bool(part, iota):
            return False
    return True


def apply_assignment(eta: Assignment, iota: Mapping, ranges: Mapping[str, tuple] | None = None) -> dict:
    """Simultaneous assignment: every right-hand side reads the original ``iota``.

    When ``ranges`` is given, integer targets must land inside their declared
    range or :class:`RangeError` is raised.
    """
    updates = {}
    for item in eta.items:
        if item.target in updates:
            raise EvalError(f"variable {item.target!r} assigned more than once")
        if isinstance(item.value, (IntConst, IntVar, Apply, Arith)):
            value = eval_int(item.value, iota)
            if ranges is not None and item.target in ranges:
                lo, hi = ranges[item.target]
                if not lo <= value <= hi:
                    raise RangeError(f"{item.target} <- {value} is outside [{lo}, {hi}]")
        else:
            value = eval_bool(item.value, iota)
        updates[item.target] = value
    result = dict(iota)
    result.update(updates)
    return result


def reset(nu: Mapping, gamma: Iterable[str]) -> dict:
    out = dict(nu)
    for clock in gamma:
        if clock not in out:
            raise EvalError(f"unknown clock {clock!r}")
        out[clock] = 0
    return out


def advance(nu: Mapping, n: int) -> dict:
    if n < 0:
        raise ValueError("time only advances forward")
    return {clock: value + n for clock, value in nu.items()}


# --- static queries -------------------------------------------------------

def clock_atoms(psi) -> list:
    """Flatten a clock constraint (or guard) into its atomic conjuncts."""
    if isinstance(psi, Guard):
        out = []
        for part in psi.clock_parts:
            out.extend(clock_atoms(part))
        return out
    if isinstance(psi, ClockAnd):
        return clock_atoms(psi.left) + clock_atoms(psi.right)
    return [psi]


def is_integral(alpha: AExpr) -> bool:
    """True when the expression can only produce integers without rounding."""
    if isinstance(alpha, (IntConst, IntVar)):
        return True
    if isinstance(alpha, Apply):
        return alpha.table.integral
    if alpha.op in ("/", "%"):
        return True
    return is_integral(alpha.left) and is_integral(alpha.right)


def variables_read(node) -> set:
    """Names of boolean/integer variables and clocks referenced by a tree."""
    if isinstance(node, (BoolVar, IntVar)):
        return {node.name}
    if isinstance(node, (BoolConst, IntConst, ClockConst)):
        return set()
    if isinstance(node, (And, Compare, Arith, ClockAnd)):
        return variables_read(node.left) | variables_read(node.right)
    if isinstance(node, Not):
        return variables_read(node.operand)
    if isinstance(node, Apply):
        return set().union(*(variables_read(a) for a in node.args))
    if isinstance(node, ClockCompare):
        return {node.clock} | ({node.other} if node.other else set())
    if isinstance(node, Guard):
        return set().union(set(), *(variables_read(p) for p in node.parts))
    if isinstance(node, Assignment):
        return set().union(set(), *(variables_read(i.value) for i in node.items))
    raise TypeError(f"not an expression node: {node!r}")
