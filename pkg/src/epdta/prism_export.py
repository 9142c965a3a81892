"""Export an automaton as a PRISM MDP model, and read that subset back.

The exported module has one bounded integer ``loc`` for the location (the
mapping is listed in the header comment), one ``[0..MAX_TIME]`` variable per
clock plus ``t``, and the automaton's boolean and integer variables.  There
is one command for the horizon, one time command per location, and one
command per edge in declaration order:

* horizon: ``t=MAX_TIME`` moves to the ``stop`` location;
* time: the invariant with every clock shifted by one, ``t<MAX_TIME`` and the
  negation of every urgent guard of the location;
* urgent edge: its guard and ``t<MAX_TIME``;
* non-urgent edge: additionally the negation of every urgent guard.

Integer ``/`` and ``%`` truncate toward zero, and values that may be
fractional are rounded half away from zero where the automaton rounds them.
Identifiers that clash with PRISM keywords (or with ``loc``/``MAX_TIME``) are
renamed with the prefix ``v_``.  Action names appear as comments on the
command they belong to.

:func:`import_mini` parses exactly the subset written by :func:`export` and
expands it into an explicit MDP with exact rational arithmetic, so the
export can be checked against :func:`semantics.enumerate_states` without
running PRISM.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from . import __version__
from . import expr as E
from .automaton import EPSILON, GLOBAL_CLOCK, STOP, Epdta, _fmt_fraction, dump
from .semantics import MdpGraph, enumerate_states, reach_probability

PREFIX = "v_"
LOC = "loc"
MAX_TIME = "MAX_TIME"

PRISM_KEYWORDS = frozenset("""
A bool clock const ctmc C ctmdp double dtmc E endinit endinvariant endmodule endobservables endplayer
endrewards endsystem false formula filter func F global G init invariant I int label max mdp min module
nondeterministic observable observables of Pmax Pmin P player probabilistic prob pta rate rewards Rmax
Rmin R S stochastic system true U W X ceil floor pow mod log
""".split())


class PrismError(Exception):
    pass


# --- naming ------------------------------------------------------------------

class _Naming:
    def __init__(self, a: Epdta):
        taken = set(a.clocks) | set(a.bools) | set(a.ints)
        blocked = PRISM_KEYWORDS | {LOC, MAX_TIME}
        self.names = {}
        for name in tuple(a.clocks) + (GLOBAL_CLOCK,) + tuple(a.bools) + tuple(a.ints):
            new = name
            while new in blocked or (new != name and new in taken):
                new = PREFIX + new
            self.names[name] = new
            taken.add(new)
        module = re.sub(r"\W", "_", a.name) or "epdta"
        if not re.match(r"[A-Za-z_]", module):
            module = "m_" + module
        while module in blocked or module in taken:
            module = "m_" + module
        self.module = module
        self.locations = tuple(a.locations) + (STOP,)
        self.loc_index = {q: i for i, q in enumerate(self.locations)}
        labels = {}
        for q in self.locations:
            label = q
            while label in ("init", "deadlock") or label in labels.values():
                label = "loc_" + label
            labels[q] = label
        self.labels = labels

    def __getitem__(self, name: str) -> str:
        return self.names[name]


def _const(value) -> str:
    text = _fmt_fraction(Fraction(value))
    return f"({text})" if ("/" in text or text.startswith("-")) else text


def _round(text: str) -> str:
    return f"({text} >= 0 ? floor({text} + 1/2) : -floor(-{text} + 1/2))"


class _Emitter:
    def __init__(self, naming: _Naming):
        self.n = naming

    def arith(self, node) -> str:
        if isinstance(node, E.IntConst):
            return _const(node.value)
        if isinstance(node, E.IntVar):
            return self.n[node.name]
        if isinstance(node, E.Apply):
            return self.apply(node)
        if node.op in "+-*":
            return f"({self.arith(node.left)} {node.op} {self.arith(node.right)})"
        a, b = self.rounded(node.left), self.rounded(node.right)
        trunc = f"({a}/{b} >= 0 ? floor({a}/{b}) : ceil({a}/{b}))"
        return trunc if node.op == "/" else f"({a} - {b} * {trunc})"

    def rounded(self, node) -> str:
        text = self.arith(node)
        return text if E.is_integral(node) else _round(text)

    def apply(self, node: E.Apply) -> str:
        table = node.table
        if not any(E.variables_read(arg) for arg in node.args):
            return _const(table(*(E.eval_int(arg, {}) for arg in node.args)))
        args = [self.rounded(arg) for arg in node.args]
        return self._chain(table, args, 0, ())

    def _chain(self, table, args, axis, prefix) -> str:
        lo, hi = table.bounds[axis]
        if axis == len(args) - 1:
            leaf = lambda i: _const(table(*prefix, i))  # noqa: E731
        else:
            leaf = lambda i: self._chain(table, args, axis + 1, prefix + (i,))  # noqa: E731
        parts = [f"{args[axis]}={i} ? {leaf(i)} : " for i in range(lo, hi)]
        return "(" + "".join(parts) + leaf(hi) + ")"

    def boolean(self, node) -> str:
        if isinstance(node, E.BoolConst):
            return "true" if node.value else "false"
        if isinstance(node, E.BoolVar):
            return self.n[node.name]
        if isinstance(node, E.And):
            return f"({self.boolean(node.left)} & {self.boolean(node.right)})"
        if isinstance(node, E.Not):
            return f"!{self.boolean(node.operand)}" if isinstance(node.operand, (E.BoolVar, E.BoolConst)) \
                else f"!({self.boolean(node.operand)})"
        return f"({self.arith(node.left)} {node.op} {self.arith(node.right)})"

    def clock(self, node, shift: int = 0) -> str:
        if isinstance(node, E.ClockConst):
            return "true" if node.value else "false"
        if isinstance(node, E.ClockAnd):
            return f"{self.clock(node.left, shift)} & {self.clock(node.right, shift)}"
        if node.other is not None:
            lhs = f"{self.n[node.clock]}-{self.n[node.other]}"
        elif shift:
            lhs = f"{self.n[node.clock]}+{shift}"
        else:
            lhs = self.n[node.clock]
        return f"({lhs}{node.op}{node.bound})"

    def guard(self, g: E.Guard) -> str:
        if not g.parts:
            return "true"
        out = []
        for part in g.parts:
            out.append(self.clock(part) if isinstance(part, (E.ClockConst, E.ClockCompare, E.ClockAnd))
                       else self.boolean(part))
        return " & ".join(out)


def source_hash(a: Epdta) -> str:
    return hashlib.sha256(dump(a).encode("utf-8")).hexdigest()


def export(a: Epdta) -> str:
    """PRISM model text for ``a``; byte-identical for equal automata."""
    n = _Naming(a)
    em = _Emitter(n)
    stop = n.loc_index[STOP]
    lines = [
        f"// PRISM MDP exported by epdta {__version__}",
        f"// source automaton: {a.name}",
        f"// source sha256: {source_hash(a)}",
        "// location encoding:",
    ]
    lines += [f"//   {LOC} = {i} : {q}" for i, q in enumerate(n.locations)]
    renamed = [(old, new) for old, new in n.names.items() if old != new]
    if renamed:
        lines.append("// renamed identifiers:")
        lines += [f"//   {old} -> {new}" for old, new in renamed]
    lines += ["", "mdp", "", f"const int {MAX_TIME} = {a.max_time};", "", f"module {n.module}", ""]
    lines.append(f"  {LOC} : [0..{len(n.locations) - 1}] init {n.loc_index[a.initial]};")
    for c in tuple(a.clocks) + (GLOBAL_CLOCK,):
        lines.append(f"  {n[c]} : [0..{MAX_TIME}] init 0;")
    for b in a.bools:
        lines.append(f"  {n[b]} : bool init {'true' if a.init_values[b] else 'false'};")
    for v, (lo, hi) in a.ints.items():
        lines.append(f"  {n[v]} : [{lo}..{hi}] init {a.init_values[v]};")
    lines += ["", "  // horizon reached", f"  [] {n[GLOBAL_CLOCK]}={MAX_TIME} -> 1 : ({LOC}'={stop});"]

    all_clocks = tuple(a.clocks) + (GLOBAL_CLOCK,)
    tick = " & ".join(f"({n[c]}'={n[c]}+1)" for c in all_clocks)
    live = f"{n[GLOBAL_CLOCK]}<{MAX_TIME}"
    for q in n.locations:
        urgent = [em.guard(e.guard) for e in a.edges if e.source == q and e.urgent]
        blockers = "".join(f" & !({g})" for g in urgent)
        inv = E.ClockConst(True) if q == STOP else a.invariant(q)
        lines.append(f"  // time at {q}")
        shifted = "" if inv == E.ClockConst(True) else f" & {em.clock(inv, 1)}"
        lines.append(f"  [] {LOC}={n.loc_index[q]} & {live}{shifted}{blockers} -> 1 : {tick};")

    for k, e in enumerate(a.edges):
        blockers = "" if e.urgent else "".join(
            f" & !({em.guard(u.guard)})" for u in a.edges if u.source == e.source and u.urgent)
        actions = ", ".join(o.action if o.action != EPSILON else "eps" for o, _ in e.distribution)
        lines.append(f"  // edge {k}{' urgent' if e.urgent else ''} from {e.source}; actions: {actions}")
        branches = []
        for outcome, p in e.distribution:
            ups = [f"({LOC}'={n.loc_index[outcome.target]})"]
            ups += [f"({n[c]}'=0)" for c in a.clocks if c in outcome.reset]
            for item in outcome.assignment:
                if isinstance(item.value, (E.IntConst, E.IntVar, E.Apply, E.Arith)):
                    value = em.rounded(item.value)
                else:
                    value = em.boolean(item.value)
                ups.append(f"({n[item.target]}'={value})")
            branches.append(f"{_const(p)} : " + " & ".join(ups))
        lines.append(f"  [] {LOC}={n.loc_index[e.source]} & {live} & ({em.guard(e.guard)}){blockers} -> "
                     + " + ".join(branches) + ";")
    lines += ["", "endmodule", ""]
    for q in n.locations:
        lines.append(f'label "{n.labels[q]}" = {LOC}={n.loc_index[q]};')
    return "\n".join(lines) + "\n"


def write(a: Epdta, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(export(a))


# --- mini reader ---------------------------------------------------------------

_TOKEN = re.compile(r"""\s*(?:
    (?P<num>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"]*")
  | (?P<op>->|<=|>=|!=|\.\.|[=<>&|!+\-*/?:;()\[\]',])
)""", re.VERBOSE)


def _tokenize(text: str) -> list:
    text = re.sub(r"//[^\n]*", "", text)
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PrismError(f"unexpected character {text[pos:pos + 10].strip()!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    out.append(("end", None))
    return out


_BINARY = {
    "+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
    "/": lambda a, b: Fraction(a) / b if b != 0 else _zero_division(),
    "=": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b,
}


def _zero_division():
    raise PrismError("division by zero")


def _norm(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    return x


class _MiniParser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.consts: dict = {}
        self.slots: dict = {}

    def peek(self, k=0):
        return self.toks[self.i + k]

    def at(self, value, k=0):
        return self.toks[self.i + k][1] == value and self.toks[self.i + k][0] != "str"

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise PrismError(f"expected {value!r}, found {tok[1]!r}")
        return tok

    def ident(self) -> str:
        kind, value = self.take()
        if kind != "id":
            raise PrismError(f"expected identifier, found {value!r}")
        return value

    # Expressions compile to closures over the state tuple.
    def expr(self):
        pairs = []
        e = self.disj()
        while self.at("?"):
            self.take()
            then = self.expr()
            self.expect(":")
            pairs.append((e, then))
            e = self.disj()
        if not pairs:
            return e
        default = e

        def chain(s):
            for cond, val in pairs:
                if cond(s):
                    return val(s)
            return default(s)
        return chain

    def _binary_level(self, sub, ops):
        e = sub()
        while self.peek()[0] == "op" and self.peek()[1] in ops:
            op = self.take()[1]
            rhs = sub()
            f = _BINARY[op]
            e = (lambda f, l, r: lambda s: _norm(f(l(s), r(s))))(f, e, rhs)
        return e

    def disj(self):
        e = self.conj()
        while self.at("|"):
            self.take()
            e = (lambda l, r: lambda s: l(s) or r(s))(e, self.conj())
        return e

    def conj(self):
        e = self.neg()
        while self.at("&"):
            self.take()
            e = (lambda l, r: lambda s: l(s) and r(s))(e, self.neg())
        return e

    def neg(self):
        if self.at("!"):
            self.take()
            inner = self.neg()
            return lambda s: not inner(s)
        return self.rel()

    def rel(self):
        e = self.add()
        if self.peek()[0] == "op" and self.peek()[1] in ("=", "!=", "<", "<=", ">", ">="):
            f = _BINARY[self.take()[1]]
            rhs = self.add()
            return (lambda l, r: lambda s: f(l(s), r(s)))(e, rhs)
        return e

    def add(self):
        return self._binary_level(self.mul, ("+", "-"))

    def mul(self):
        return self._binary_level(self.unary, ("*", "/"))

    def unary(self):
        if self.at("-"):
            self.take()
            inner = self.unary()
            return lambda s: -inner(s)
        return self.primary()

    def primary(self):
        kind, value = self.take()
        if kind == "num":
            v = _norm(Fraction(value))
            return lambda s: v
        if kind == "id":
            if value in ("true", "false"):
                v = value == "true"
                return lambda s: v
            if value in ("floor", "ceil"):
                fn = math.floor if value == "floor" else math.ceil
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return lambda s: fn(inner(s))
            if value in self.consts:
                v = self.consts[value]
                return lambda s: v
            if value in self.slots:
                slot = self.slots[value]
                return lambda s: s[slot]
            raise PrismError(f"unknown identifier {value!r}")
        if value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise PrismError(f"unexpected token {value!r}")

    def constant(self):
        f = self.expr()
        return f(())


@dataclass
class MiniModel:
    module: str
    variables: list  # (name, kind, lo, hi, init)
    commands: list  # (guard, [(prob, [(slot, value_fn)])])
    labels: dict
    constants: dict

    @property
    def initial(self) -> tuple:
        return tuple(v[4] for v in self.variables)


def parse_mini(text: str) -> MiniModel:
    """Parse the exported PRISM subset into a :class:`MiniModel`."""
    p = _MiniParser(text)
    p.expect("mdp")
    variables, commands, labels = [], [], {}
    module = None
    while p.peek()[0] != "end":
        if p.at("const"):
            p.take()
            p.expect("int")
            name = p.ident()
            p.expect("=")
            p.consts[name] = p.constant()
            p.expect(";")
        elif p.at("module"):
            if module is not None:
                raise PrismError("only one module is supported")
            p.take()
            module = p.ident()
            while p.peek()[0] == "id" and p.at(":", 1):
                name = p.ident()
                p.expect(":")
                if p.at("bool"):
                    p.take()
                    kind, lo, hi = "bool", False, True
                else:
                    p.expect("[")
                    lo = p.constant()
                    p.expect("..")
                    hi = p.constant()
                    p.expect("]")
                    kind = "int"
                p.expect("init")
                init = p.constant()
                p.expect(";")
                p.slots[name] = len(variables)
                variables.append((name, kind, lo, hi, init))
            while p.at("["):
                p.take()
                p.expect("]")
                guard = p.expr()
                p.expect("->")
                branches = []
                while True:
                    prob = p.expr()
                    p.expect(":")
                    updates = []
                    if p.at("true"):
                        p.take()
                    else:
                        while True:
                            p.expect("(")
                            name = p.ident()
                            if name not in p.slots:
                                raise PrismError(f"update of undeclared variable {name!r}")
                            p.expect("'")
                            p.expect("=")
                            updates.append((p.slots[name], p.expr()))
                            p.expect(")")
                            if not p.at("&"):
                                break
                            p.take()
                    branches.append((prob, updates))
                    if not p.at("+"):
                        break
                    p.take()
                p.expect(";")
                commands.append((guard, branches))
            p.expect("endmodule")
        elif p.at("label"):
            p.take()
            kind, value = p.take()
            if kind != "str":
                raise PrismError("label name must be a string")
            p.expect("=")
            labels[value[1:-1]] = p.expr()
            p.expect(";")
        else:
            raise PrismError(f"unsupported construct at {p.peek()[1]!r}")
    if module is None:
        raise PrismError("no module found")
    return MiniModel(module, variables, commands, labels, dict(p.consts))


@dataclass
class MiniGraph:
    """Explicit MDP read back from PRISM text.  ``choices[i]`` lists ``{j: p}``."""

    model: MiniModel
    states: list
    index: dict
    choices: list = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def label(self, name: str) -> list:
        fn = self.model.labels[name]
        return [bool(fn(s)) for s in self.states]


def import_mini(text: str, cap: int = 10**6) -> MiniGraph:
    """Parse exported text and expand every reachable state."""
    model = parse_mini(text)
    bounds = [(v[0], v[2], v[3], v[1]) for v in model.variables]
    init = model.initial
    states, index, choices = [init], {init: 0}, []
    queue = deque([init])
    while queue:
        s = queue.popleft()
        dists = []
        for guard, branches in model.commands:
            if not guard(s):
                continue
            dist: dict = {}
            total = Fraction(0)
            for prob, updates in branches:
                pr = Fraction(prob(s))
                total += pr
                succ = list(s)
                for slot, fn in updates:
                    succ[slot] = fn(s)
                for slot, (name, lo, hi, kind) in enumerate(bounds):
                    v = succ[slot]
                    if kind == "int":
                        if isinstance(v, Fraction) or isinstance(v, bool) or not lo <= v <= hi:
                            raise PrismError(f"{name}'={v} outside [{lo}..{hi}]")
                    elif not isinstance(v, bool):
                        raise PrismError(f"{name}'={v} is not boolean")
                succ = tuple(succ)
                j = index.get(succ)
                if j is None:
                    if len(states) >= cap:
                        raise PrismError(f"state cap {cap} exceeded")
                    j = index[succ] = len(states)
                    states.append(succ)
                    queue.append(succ)
                dist[j] = dist.get(j, 0) + pr
            if total != 1:
                raise PrismError(f"command probabilities sum to {total} in state {s}")
            dists.append(dist)
        choices.append(dists)
    return MiniGraph(model, states, index, choices)


# --- comparison ------------------------------------------------------------------

def encode_state(a: Epdta, s) -> tuple:
    """The PRISM valuation (in declaration order) corresponding to an MDP state."""
    loc = (tuple(a.locations) + (STOP,)).index(s.location)
    return (loc,) + tuple(s.clocks) + tuple(s.values)


def isomorphic(g: MdpGraph, m: MiniGraph, tol: float = 1e-9) -> tuple:
    """Check that the natural state encoding is a bijection preserving every
    state's set of distributions (up to ``tol``).  Returns ``(ok, reason)``."""
    a = g.automaton
    if len(g.states) != len(m.states):
        return False, f"state counts differ: {len(g.states)} vs {len(m.states)}"
    mapping = []
    for s in g.states:
        j = m.index.get(encode_state(a, s))
        if j is None:
            return False, f"state {s} missing from the imported model"
        mapping.append(j)
    if len(set(mapping)) != len(mapping):
        return False, "state encoding is not injective"
    for i, dists in enumerate(g.choices):
        mine = [{mapping[j]: float(p) for j, p in d.items()} for _, _, d in dists]
        theirs = [{j: float(p) for j, p in d.items()} for d in m.choices[mapping[i]]]
        if len(mine) != len(theirs):
            return False, f"state {g.states[i]}: {len(mine)} vs {len(theirs)} distributions"
        unused = list(range(len(theirs)))
        for d in mine:
            for k in unused:
                t = theirs[k]
                if t.keys() == d.keys() and all(abs(t[j] - d[j]) <= tol for j in d):
                    unused.remove(k)
                    break
            else:
                return False, f"state {g.states[i]}: distribution {d} has no counterpart"
    return True, "ok"


def mini_reach(m: MiniGraph, label: str, stop_label: str = STOP) -> Fraction:
    """Reachability of a label under uniform resolution, in exact arithmetic.

    Only acyclic graphs apart from self-loops on absorbing states are
    supported, which covers every exported model (``t`` strictly increases
    or the location changes).
    """
    hit = m.label(label)
    stop = m.label(stop_label) if stop_label in m.model.labels else [False] * len(m)
    n = len(m)
    rows = []
    for i in range(n):
        if hit[i] or stop[i] or not m.choices[i]:
            rows.append({})
            continue
        k = len(m.choices[i])
        row: dict = {}
        for d in m.choices[i]:
            for j, p in d.items():
                row[j] = row.get(j, 0) + Fraction(p) / k
        rows.append(row)
    indeg = [0] * n
    for row in rows:
        for j in row:
            indeg[j] += 1
    order = [i for i in range(n) if indeg[i] == 0]
    for i in order:
        for j in rows[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                order.append(j)
    if len(order) < n:
        raise PrismError("imported graph has cycles; exact reachability not supported")
    mass = [Fraction(0)] * n
    mass[0] = Fraction(1)
    total = Fraction(0)
    for i in order:
        if hit[i]:
            total += mass[i]
        for j, p in rows[i].items():
            mass[j] += mass[i] * p
    return total


@dataclass
class RoundTrip:
    states: int
    isomorphic: bool
    reason: str
    reach: dict  # location -> (original, imported)

    @property
    def ok(self) -> bool:
        return self.isomorphic and all(abs(float(x) - float(y)) < 1e-9 for x, y in self.reach.values())


def round_trip(a: Epdta, cap: int | None = None) -> RoundTrip:
    """Export, re-import and compare against the native enumeration."""
    text = export(a)
    mini = import_mini(text)
    g = enumerate_states(a, cap=cap)
    ok, reason = isomorphic(g, mini)
    labels = _Naming(a).labels
    reach = {}
    for q in a.locations:
        if q == a.initial:
            continue
        reach[q] = (reach_probability(a, q, a.max_time, cap=cap), mini_reach(mini, labels[q], labels[STOP]))
    return RoundTrip(len(g.states), ok, reason, reach)
