"""Automaton structure, validation and the ``.epdta`` model file format.

Model file format (UTF-8, ``#`` starts a comment, a line whose first word is
a section keyword opens that section; the rest of that line is its first item)::

    name fig1
    clocks x
    bools b = ff
    ints
      v in [0, 11] = 0
    tables
      f[0..2] = 0.1 1/4 0.73
      g[0..1][0..2] =
        1 2 3
        4 5 6
    locations
      l0 invariant: x <= 2
      l1
      l2
    init l0
    max_time 10
    edges
      edge l0 guard: x >= 1 & ~b
        0.7: a, {}, reset{x}, -> l1
        0.3: ε, {b <- tt}, reset{}, -> l2
      edge l1 urgent guard: true
        1: a, {}, reset{}, -> l2

``ε`` (or an empty field) is the silent action.  Probabilities are decimals
or ``p/q`` rationals and must sum to one; they are never renormalised.
``t`` is reserved for the global clock and ``stop`` for the terminal location.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from . import expr as E

EPSILON = ""
GLOBAL_CLOCK = "t"
STOP = "stop"
PROB_TOLERANCE = Fraction(1, 10**9)

_RESERVED = {GLOBAL_CLOCK, "tt", "ff", "true", "false", "urgent", "guard", "reset", "invariant", "edge"}
_SECTIONS = ("name", "clocks", "bools", "ints", "tables", "locations", "init", "max_time", "edges")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ModelError(Exception):
    """Raised when a model cannot be loaded or fails validation."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class Outcome:
    action: str
    assignment: E.Assignment
    reset: frozenset
    target: str


@dataclass(frozen=True)
class Edge:
    source: str
    guard: E.Guard
    distribution: tuple  # ((Outcome, Fraction), ...)
    urgent: bool = False

    @property
    def outcomes(self) -> tuple:
        return tuple(o for o, _ in self.distribution)


@dataclass(frozen=True, eq=False)
class Epdta:
    locations: tuple
    clocks: tuple
    bools: tuple
    ints: Mapping[str, tuple]
    edges: tuple
    initial: str
    init_values: Mapping[str, object]
    invariants: Mapping[str, object] = field(default_factory=dict)
    max_time: int = 1
    tables: Mapping[str, E.FunctionTable] = field(default_factory=dict)
    name: str = "epdta"

    @property
    def decls(self) -> E.Declarations:
        return E.Declarations.of(self.clocks, self.bools, dict(self.ints), self.tables)

    @property
    def urgent_edges(self) -> tuple:
        return tuple(e for e in self.edges if e.urgent)

    @property
    def nonurgent_edges(self) -> tuple:
        return tuple(e for e in self.edges if not e.urgent)

    @property
    def actions(self) -> tuple:
        seen = []
        for edge in self.edges:
            for outcome in edge.outcomes:
                if outcome.action != EPSILON and outcome.action not in seen:
                    seen.append(outcome.action)
        return tuple(seen)

    def invariant(self, location: str):
        return self.invariants.get(location, E.ClockConst(True))

    def edges_from(self, location: str) -> tuple:
        return tuple(e for e in self.edges if e.source == location)


# --- validation -----------------------------------------------------------

def _past_closed(psi) -> bool:
    return all(
        (isinstance(atom, E.ClockConst) and atom.value)
        or (isinstance(atom, E.ClockCompare) and atom.other is None and atom.op in ("<", "<="))
        for atom in E.clock_atoms(psi)
    )


def validate(a: Epdta) -> list:
    """Return one diagnostic string per problem; an empty list means valid."""
    diags = []
    locations = set(a.locations)
    if len(locations) != len(a.locations):
        diags.append("duplicate location names")
    if not a.locations:
        diags.append("an automaton needs at least one location")
    if STOP in locations:
        diags.append(f"location name {STOP!r} is reserved")
    if a.initial not in locations:
        diags.append(f"initial location {a.initial!r} is not declared")
    if not isinstance(a.max_time, int) or a.max_time < 1:
        diags.append(f"max_time must be a positive integer, got {a.max_time!r}")

    names = list(a.clocks) + list(a.bools) + list(a.ints) + list(a.tables)
    for name in names:
        if not _IDENT.match(name):
            diags.append(f"invalid identifier {name!r}")
        if name in _RESERVED:
            diags.append(f"identifier {name!r} is reserved")
    dupes = sorted({n for n in names if names.count(n) > 1})
    for name in dupes:
        diags.append(f"identifier {name!r} declared more than once")

    for name, (lo, hi) in a.ints.items():
        if lo > hi:
            diags.append(f"integer {name} has empty range [{lo}, {hi}]")
    for name in a.bools:
        if name not in a.init_values:
            diags.append(f"boolean {name} has no initial value")
        elif not isinstance(a.init_values[name], bool):
            diags.append(f"boolean {name} initial value must be tt or ff")
    for name, (lo, hi) in a.ints.items():
        value = a.init_values.get(name)
        if value is None:
            diags.append(f"integer {name} has no initial value")
        elif isinstance(value, bool) or not isinstance(value, int) or not lo <= value <= hi:
            diags.append(f"integer {name} initial value {value!r} outside [{lo}, {hi}]")
    for name in a.init_values:
        if name not in a.bools and name not in a.ints:
            diags.append(f"initial value given for undeclared variable {name!r}")

    for name, table in a.tables.items():
        if table.name != name:
            diags.append(f"table registered as {name!r} is named {table.name!r}")

    clocks = set(a.clocks)
    for loc, psi in a.invariants.items():
        if loc not in locations:
            diags.append(f"invariant given for undeclared location {loc!r}")
        if not _past_closed(psi):
            diags.append(
                f"invariant of {loc} is not past-closed: {E.to_text(psi)} "
                "(only conjunctions of true, x <= c, x < c are allowed)")
        unknown = E.variables_read(psi) - clocks
        if unknown:
            diags.append(f"invariant of {loc} uses undeclared clocks {sorted(unknown)}")

    declared = clocks | set(a.bools) | set(a.ints)
    for k, edge in enumerate(a.edges):
        where = f"edge #{k} from {edge.source}"
        if edge.source not in locations:
            diags.append(f"{where}: source is not declared")
        unknown = E.variables_read(edge.guard) - declared
        if unknown:
            diags.append(f"{where}: guard uses undeclared names {sorted(unknown)}")
        diags.extend(f"{where}: {msg}" for msg in _table_refs(edge.guard, a.tables))
        if not edge.distribution:
            diags.append(f"{where}: empty distribution")
        total = Fraction(0)
        for outcome, p in edge.distribution:
            p = Fraction(p)
            total += p
            if not 0 < p <= 1:
                diags.append(f"{where}: probability {p} outside (0, 1]")
            if outcome.target not in locations:
                diags.append(f"{where}: target {outcome.target!r} is not declared")
            bad = set(outcome.reset) - clocks
            if bad:
                diags.append(f"{where}: reset of undeclared clocks {sorted(bad)}")
            targets = outcome.assignment.targets
            for name in sorted({t for t in targets if targets.count(t) > 1}):
                diags.append(f"{where}: variable {name} assigned more than once")
            for item in outcome.assignment.items:
                if item.target in a.bools:
                    if isinstance(item.value, (E.IntConst, E.IntVar, E.Apply, E.Arith)):
                        diags.append(f"{where}: boolean {item.target} assigned an integer")
                elif item.target in a.ints:
                    if not isinstance(item.value, (E.IntConst, E.IntVar, E.Apply, E.Arith)):
                        diags.append(f"{where}: integer {item.target} assigned a boolean")
                else:
                    diags.append(f"{where}: assignment to undeclared variable {item.target!r}")
            unknown = E.variables_read(outcome.assignment) - (set(a.bools) | set(a.ints))
            if unknown:
                diags.append(f"{where}: assignment reads undeclared names {sorted(unknown)}")
            diags.extend(f"{where}: {msg}" for msg in _table_refs(outcome.assignment, a.tables))
        if edge.distribution and abs(total - 1) > PROB_TOLERANCE:
            diags.append(f"{where}: probabilities sum to {float(total):.12g}, not 1")
    return diags


def _table_refs(node, tables) -> list:
    found = []

    def walk(n):
        if isinstance(n, E.Apply):
            if tables.get(n.table.name) is not n.table:
                found.append(f"table {n.table.name!r} is not registered with the automaton")
            for arg in n.args:
                walk(arg)
        elif isinstance(n, (E.And, E.Compare, E.Arith)):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, E.Not):
            walk(n.operand)
        elif isinstance(n, E.Guard):
            for p in n.parts:
                walk(p)
        elif isinstance(n, E.Assignment):
            for item in n.items:
                walk(item.value)

    walk(node)
    return found


def check(a: Epdta) -> Epdta:
    diags = validate(a)
    if diags:
        raise ModelError(diags)
    return a


# --- model files ----------------------------------------------------------

_TABLE_HEAD = re.compile(r"^([A-Za-z_]\w*)((?:\[\s*-?\d+\s*\.\.\s*-?\d+\s*\])+)\s*=\s*(.*)$")
_AXIS = re.compile(r"\[\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*\]")
_INT_DECL = re.compile(r"^([A-Za-z_]\w*)\s+in\s+\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]\s*=\s*(-?\d+)$")
_BOOL_DECL = re.compile(r"^([A-Za-z_]\w*)(?:\s*=\s*(tt|ff))?$")
_LOCATION = re.compile(r"^([A-Za-z_]\w*)(?:\s+invariant:\s*(.+))?$")
_EDGE = re.compile(r"^edge\s+([A-Za-z_]\w*)(\s+urgent)?(?:\s+guard:\s*(.*))?$")
_OUTCOME = re.compile(
    r"^(?P<p>[^:]+):\s*(?P<act>[^,{]*?)\s*,\s*\{(?P<asg>[^}]*)\}\s*,"
    r"\s*reset\s*\{(?P<rst>[^}]*)\}\s*,\s*->\s*(?P<tgt>[A-Za-z_]\w*)\s*$")


def _split_names(text: str) -> list:
    return [n for n in re.split(r"[\s,]+", text.strip()) if n]


def load(text: str) -> Epdta:
    """Parse and validate a model file."""
    sections: dict[str, list] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head in _SECTIONS and raw[:1] not in (" ", "\t"):
            if head in sections:
                raise ModelError(f"line {lineno}: section {head!r} appears twice")
            current = head
            sections[current] = []
            if rest.strip():
                sections[current].append((lineno, rest.strip()))
        elif current is None:
            raise ModelError(f"line {lineno}: content before any section")
        else:
            sections[current].append((lineno, line))

    def single(name, default=None):
        items = sections.get(name, [])
        if not items:
            if default is None:
                raise ModelError(f"missing section {name!r}")
            return default
        if len(items) > 1:
            raise ModelError(f"line {items[1][0]}: section {name!r} takes one value")
        return items[0][1]

    clocks = []
    for _, item in sections.get("clocks", []):
        clocks.extend(_split_names(item))
    bools, init_values = [], {}
    for lineno, item in sections.get("bools", []):
        for decl in item.split(","):
            m = _BOOL_DECL.match(decl.strip())
            if not m:
                raise ModelError(f"line {lineno}: bad boolean declaration {decl.strip()!r}")
            bools.append(m.group(1))
            init_values[m.group(1)] = m.group(2) == "tt"
    ints = {}
    for lineno, item in sections.get("ints", []):
        m = _INT_DECL.match(item)
        if not m:
            raise ModelError(f"line {lineno}: bad integer declaration {item!r}")
        name, lo, hi, init = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
        ints[name] = (lo, hi)
        init_values[name] = init

    tables = {}
    pending = None
    for lineno, item in sections.get("tables", []) + [(0, None)]:
        m = _TABLE_HEAD.match(item) if item is not None else None
        if item is None or m:
            if pending is not None:
                name, bounds, values, at = pending
                try:
                    tables[name] = E.FunctionTable(name, bounds, tuple(Fraction(v) for v in values))
                except (ValueError, ZeroDivisionError) as exc:
                    raise ModelError(f"line {at}: {exc}") from None
            if m:
                bounds = tuple((int(lo), int(hi)) for lo, hi in _AXIS.findall(m.group(2)))
                pending = (m.group(1), bounds, m.group(3).split(), lineno)
        elif pending is None:
            raise ModelError(f"line {lineno}: table values before a table header")
        else:
            pending[2].extend(item.split())

    decls = E.Declarations.of(clocks, bools, ints, tables)

    def parsed(kind, source, lineno):
        try:
            return E.parse(source, decls, kind)
        except E.ParseError as exc:
            raise ModelError(f"line {lineno}: {exc}") from None

    locations, invariants = [], {}
    for lineno, item in sections.get("locations", []):
        m = _LOCATION.match(item)
        if not m:
            raise ModelError(f"line {lineno}: bad location {item!r}")
        locations.append(m.group(1))
        if m.group(2):
            invariants[m.group(1)] = parsed("clock", m.group(2), lineno)

    initial = single("init")
    try:
        max_time = int(single("max_time"))
    except ValueError:
        raise ModelError("max_time must be an integer") from None
    name = single("name", "epdta")

    edges = []
    head = None
    outcomes = []

    def flush():
        if head is not None:
            edges.append(Edge(head[0], head[1], tuple(outcomes), head[2]))

    for lineno, item in sections.get("edges", []):
        m = _EDGE.match(item)
        if m:
            flush()
            guard = parsed("guard", m.group(3), lineno) if m.group(3) else E.Guard(())
            head = (m.group(1), guard, bool(m.group(2)))
            outcomes = []
            continue
        m = _OUTCOME.match(item)
        if not m or head is None:
            raise ModelError(f"line {lineno}: expected an edge header or outcome line, got {item!r}")
        try:
            prob = Fraction(m.group("p").strip())
        except (ValueError, ZeroDivisionError):
            raise ModelError(f"line {lineno}: bad probability {m.group('p')!r}") from None
        action = m.group("act").strip()
        if action == "ε":
            action = EPSILON
        outcome = Outcome(action, parsed("assignment", m.group("asg").strip(), lineno),
                          frozenset(_split_names(m.group("rst"))), m.group("tgt"))
        outcomes.append((outcome, prob))
    flush()

    return check(Epdta(
        locations=tuple(locations), clocks=tuple(clocks), bools=tuple(bools), ints=ints,
        edges=tuple(edges), initial=initial, init_values=init_values, invariants=invariants,
        max_time=max_time, tables=tables, name=name,
    ))


def _fmt_fraction(p: Fraction) -> str:
    p = Fraction(p)
    if p.denominator == 1:
        return str(p.numerator)
    d = p.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        digits = 0
        q = p
        while q.denominator != 1:
            q *= 10
            digits += 1
        sign = "-" if q < 0 else ""
        s = str(abs(q.numerator)).rjust(digits + 1, "0")
        return f"{sign}{s[:-digits]}.{s[-digits:]}"
    return f"{p.numerator}/{p.denominator}"


def dump(a: Epdta) -> str:
    """Canonical model file text; ``load(dump(a))`` reproduces ``a``."""
    out = [f"name {a.name}"]
    if a.clocks:
        out.append("clocks " + ", ".join(a.clocks))
    if a.bools:
        out.append("bools " + ", ".join(f"{b} = {'tt' if a.init_values[b] else 'ff'}" for b in a.bools))
    if a.ints:
        out.append("ints")
        out.extend(f"  {n} in [{lo}, {hi}] = {a.init_values[n]}" for n, (lo, hi) in a.ints.items())
    if a.tables:
        out.append("tables")
        for name, table in a.tables.items():
            axes = "".join(f"[{lo}..{hi}]" for lo, hi in table.bounds)
            out.append(f"  {name}{axes} =")
            width = table.bounds[-1][1] - table.bounds[-1][0] + 1
            values = [_fmt_fraction(v) for v in table.values]
            for i in range(0, len(values), width):
                out.append("    " + " ".join(values[i:i + width]))
    out.append("locations")
    for loc in a.locations:
        if loc in a.invariants:
            out.append(f"  {loc} invariant: {E.to_text(a.invariants[loc])}")
        else:
            out.append(f"  {loc}")
    out.append(f"init {a.initial}")
    out.append(f"max_time {a.max_time}")
    if a.edges:
        out.append("edges")
        for edge in a.edges:
            head = f"  edge {edge.source}" + (" urgent" if edge.urgent else "")
            if edge.guard.parts:
                head += f" guard: {E.to_text(edge.guard)}"
            out.append(head)
            for outcome, p in edge.distribution:
                action = outcome.action if outcome.action != EPSILON else "ε"
                resets = ", ".join(sorted(outcome.reset))
                out.append(f"    {_fmt_fraction(p)}: {action}, {{{E.to_text(outcome.assignment)}}}, "
                           f"reset{{{resets}}}, -> {outcome.target}")
    return "\n".join(out) + "\n"


def load_file(path) -> Epdta:
    with open(path, encoding="utf-8") as fh:
        return load(fh.read())


def save_file(a: Epdta, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump(a))


def canonical_form(a: Epdta):
    """A comparable structural summary, used to test load/dump round trips."""
    return (
        a.name, a.locations, a.clocks, a.bools, tuple(a.ints.items()),
        tuple((n, t.bounds, t.values) for n, t in a.tables.items()),
        a.initial, tuple(sorted(a.init_values.items())),
        tuple(sorted((k, E.to_text(v)) for k, v in a.invariants.items())), a.max_time,
        tuple((e.source, E.to_text(e.guard), e.urgent,
               tuple((o.action, E.to_text(o.assignment), tuple(sorted(o.reset)), o.target, Fraction(p))
                     for o, p in e.distribution)) for e in a.edges),
    )
