"""MDP semantics of an automaton: rule-based successor distributions,
seeded sampling, bounded state-space enumeration and exact reachability.

States are :class:`MdpState` tuples.  ``clocks`` lists the automaton clocks
followed by the global clock ``t``; ``values`` lists the boolean variables
followed by the integer variables, both in declaration order.

Guards and assignments are compiled once per automaton into Python
functions over those tuples, and ``steps`` memoises its result per state.
"""

from __future__ import annotations

import bisect
import os
import weakref
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple

from . import expr as E
from .automaton import EPSILON, GLOBAL_CLOCK, STOP, Epdta

__all__ = [
    "MdpState", "StepDistribution", "MdpGraph",
    "SemanticsError", "DeadlockError", "StateCapError",
    "initial_state", "make_state", "valuation", "interpretation",
    "steps", "sample_step", "enumerate_states", "reach_probability", "estimate_reach",
    "default_state_cap",
]

STATE_CAP_ENV = "EPDTA_STATE_CAP"
_CACHE_LIMIT = 400_000


class SemanticsError(Exception):
    pass


class DeadlockError(SemanticsError):
    """No rule applies in a state before the time horizon."""

    def __init__(self, state):
        self.state = state
        super().__init__(f"deadlock: no applicable rule in state {state}")


class StateCapError(SemanticsError):
    pass


class MdpState(NamedTuple):
    location: str
    clocks: tuple
    values: tuple


class StepDistribution:
    """One element of Steps(s): a rule tag and its outcomes.

    ``outcomes`` holds ``(successor, probability, action)`` triples in the
    order the edge declares them; ``rule`` is one of ``stop``, ``time``,
    ``urgent`` or ``nonurgent``; ``edge`` is the edge index for the latter two.
    """

    __slots__ = ("rule", "edge", "outcomes", "cumulative")

    def __init__(self, rule: str, edge, outcomes: tuple):
        self.rule = rule
        self.edge = edge
        self.outcomes = outcomes
        acc = 0.0
        cumulative = []
        for _, p, _ in outcomes:
            acc += float(p)
            cumulative.append(acc)
        cumulative[-1] = float("inf")
        self.cumulative = cumulative

    @property
    def total(self) -> Fraction:
        return sum((p for _, p, _ in self.outcomes), Fraction(0))

    def merged(self) -> dict:
        """Probability per distinct successor state (outcome order preserved)."""
        out: dict = {}
        for succ, p, _ in self.outcomes:
            out[succ] = out.get(succ, 0) + p
        return out

    def __repr__(self):
        tag = self.rule if self.edge is None else f"{self.rule}#{self.edge}"
        return f"StepDistribution({tag}, {len(self.outcomes)} outcomes)"


# --- code generation ------------------------------------------------------

def _norm(value):
    return value.numerator if value.denominator == 1 else value


def _div(a, b):
    return E._idiv(E.round_half_away(a), E.round_half_away(b))


def _rem(a, b):
    return E._irem(E.round_half_away(a), E.round_half_away(b))


def _range_error(name, value, lo, hi):
    raise E.RangeError(f"{name} <- {value} is outside [{lo}, {hi}]")


_PY_OPS = {"=": "==", "<=": "<=", "<": "<", ">=": ">=", ">": ">"}


class _Codegen:
    def __init__(self, clock_slot: Mapping[str, int], var_slot: Mapping[str, int], ranges: Mapping[str, tuple]):
        self.clock_slot = clock_slot
        self.var_slot = var_slot
        self.ranges = ranges
        self.tables: dict = {}

    def table(self, table) -> str:
        key = id(table)
        if key not in self.tables:
            self.tables[key] = (f"_T{len(self.tables)}", table)
        return self.tables[key][0]

    def namespace(self) -> dict:
        ns = {"_norm": _norm, "_div": _div, "_rem": _rem, "_r": E.round_half_away,
              "_range_error": _range_error}
        ns.update({name: table for name, table in self.tables.values()})
        return ns

    def arith(self, node) -> str:
        if isinstance(node, E.IntConst):
            return repr(node.value)
        if isinstance(node, E.IntVar):
            return f"v[{self.var_slot[node.name]}]"
        if isinstance(node, E.Apply):
            args = ", ".join(self.arith(a) if E.is_integral(a) else f"_r({self.arith(a)})" for a in node.args)
            return f"_norm({self.table(node.table)}({args}))"
        if node.op == "/":
            return f"_div({self.arith(node.left)}, {self.arith(node.right)})"
        if node.op == "%":
            return f"_rem({self.arith(node.left)}, {self.arith(node.right)})"
        return f"({self.arith(node.left)} {node.op} {self.arith(node.right)})"

    def boolean(self, node) -> str:
        if isinstance(node, E.BoolConst):
            return repr(node.value)
        if isinstance(node, E.BoolVar):
            return f"v[{self.var_slot[node.name]}]"
        if isinstance(node, E.And):
            return f"({self.boolean(node.left)} and {self.boolean(node.right)})"
        if isinstance(node, E.Not):
            return f"(not {self.boolean(node.operand)})"
        return f"({self.arith(node.left)} {_PY_OPS[node.op]} {self.arith(node.right)})"

    def clock(self, node, shift: int = 0) -> str:
        if isinstance(node, E.ClockConst):
            return repr(node.value)
        if isinstance(node, E.ClockAnd):
            return f"({self.clock(node.left, shift)} and {self.clock(node.right, shift)})"
        lhs = f"c[{self.clock_slot[node.clock]}]"
        if node.other is not None:
            lhs = f"{lhs} - c[{self.clock_slot[node.other]}]"
        elif shift:
            lhs = f"{lhs} + {shift}"
        return f"({lhs} {_PY_OPS[node.op]} {node.bound})"

    def guard(self, g: E.Guard) -> str:
        if not g.parts:
            return "True"
        parts = [self.clock(p) if isinstance(p, E._CLOCK_TYPES) else self.boolean(p) for p in g.parts]
        return " and ".join(parts)


class _CompiledEdge:
    __slots__ = ("index", "urgent", "outcomes")

    def __init__(self, index, urgent, outcomes):
        self.index = index
        self.urgent = urgent
        self.outcomes = outcomes  # ((target, action, prob, assign_fn, reset_slots), ...)


class _Compiled:
    def __init__(self, a: Epdta):
        self.a = a
        self.clock_names = tuple(a.clocks) + (GLOBAL_CLOCK,)
        self.var_names = tuple(a.bools) + tuple(a.ints)
        self.t_slot = len(a.clocks)
        self.max_time = a.max_time
        clock_slot = {n: i for i, n in enumerate(self.clock_names)}
        var_slot = {n: i for i, n in enumerate(self.var_names)}
        gen = _Codegen(clock_slot, var_slot, dict(a.ints))

        self.edges = []
        assign_src = []
        for k, edge in enumerate(a.edges):
            outs = []
            for j, (outcome, p) in enumerate(edge.distribution):
                fname = f"_assign_{k}_{j}"
                assign_src.append(self._assign_source(fname, outcome.assignment, gen, var_slot))
                resets = tuple(sorted(clock_slot[c] for c in outcome.reset))
                outs.append([outcome.target, outcome.action, Fraction(p), fname, resets])
            self.edges.append(_CompiledEdge(k, edge.urgent, outs))

        loc_src = []
        self.location_fn_names = {}
        for q_i, q in enumerate(tuple(a.locations) + (STOP,)):
            fname = f"_loc_{q_i}"
            self.location_fn_names[q] = fname
            lines = [f"def {fname}(c, v):", "    u = []"]
            for k, edge in enumerate(a.edges):
                if edge.source == q and edge.urgent:
                    lines.append(f"    if {gen.guard(edge.guard)}: u.append({k})")
            lines.append("    if u: return u, (), False")
            lines.append("    n = []")
            for k, edge in enumerate(a.edges):
                if edge.source == q and not edge.urgent:
                    lines.append(f"    if {gen.guard(edge.guard)}: n.append({k})")
            inv = a.invariant(q) if q != STOP else E.ClockConst(True)
            lines.append(f"    return u, n, {gen.clock(inv, shift=1)}")
            loc_src.append("\n".join(lines))

        ns = gen.namespace()
        exec(compile("\n\n".join(assign_src + loc_src), f"<epdta:{a.name}>", "exec"), ns)
        for ce in self.edges:
            for out in ce.outcomes:
                out[3] = ns[out[3]]
            ce.outcomes = tuple(tuple(o) for o in ce.outcomes)
        self.location_fns = {q: ns[f] for q, f in self.location_fn_names.items()}
        self.cache: dict = {}

    @staticmethod
    def _assign_source(fname, assignment, gen, var_slot):
        lines = [f"def {fname}(v):"]
        if not assignment.items:
            lines.append("    return v")
            return "\n".join(lines)
        news = {}
        for m, item in enumerate(assignment.items):
            slot = var_slot[item.target]
            var = f"n{m}"
            if isinstance(item.value, (E.IntConst, E.IntVar, E.Apply, E.Arith)):
                src = gen.arith(item.value)
                if not E.is_integral(item.value):
                    src = f"_r({src})"
                lo, hi = gen.ranges[item.target]
                lines.append(f"    {var} = {src}")
                lines.append(f"    if not {lo} <= {var} <= {hi}: _range_error({item.target!r}, {var}, {lo}, {hi})")
            else:
                lines.append(f"    {var} = bool({gen.boolean(item.value)})")
            news[slot] = var
        width = len(var_slot)
        items = ", ".join(news.get(i, f"v[{i}]") for i in range(width))
        lines.append(f"    return ({items}{',' if width == 1 else ''})")
        return "\n".join(lines)


_compiled_cache: "weakref.WeakKeyDictionary[Epdta, _Compiled]" = weakref.WeakKeyDictionary()


def _compiled(a: Epdta) -> _Compiled:
    comp = _compiled_cache.get(a)
    if comp is None:
        comp = _Compiled(a)
        _compiled_cache[a] = comp
    return comp


# --- states ---------------------------------------------------------------

def initial_state(a: Epdta) -> MdpState:
    return MdpState(
        a.initial,
        (0,) * (len(a.clocks) + 1),
        tuple(bool(a.init_values[b]) for b in a.bools) + tuple(int(a.init_values[v]) for v in a.ints),
    )


def make_state(a: Epdta, location: str, nu: Mapping[str, int] | None = None,
               iota: Mapping[str, object] | None = None) -> MdpState:
    """Build a state; clocks default to 0 and variables to ``a.init_values``."""
    nu = dict(nu or {})
    values = dict(a.init_values)
    values.update(iota or {})
    unknown = set(nu) - set(a.clocks) - {GLOBAL_CLOCK}
    if unknown:
        raise SemanticsError(f"unknown clocks {sorted(unknown)}")
    if location not in a.locations and location != STOP:
        raise SemanticsError(f"unknown location {location!r}")
    for name, (lo, hi) in a.ints.items():
        if not lo <= values[name] <= hi:
            raise E.RangeError(f"{name} = {values[name]} is outside [{lo}, {hi}]")
    return MdpState(
        location,
        tuple(int(nu.get(c, 0)) for c in tuple(a.clocks) + (GLOBAL_CLOCK,)),
        tuple(bool(values[b]) for b in a.bools) + tuple(int(values[v]) for v in a.ints),
    )


def valuation(a: Epdta, s: MdpState) -> dict:
    return dict(zip(tuple(a.clocks) + (GLOBAL_CLOCK,), s.clocks))


def interpretation(a: Epdta, s: MdpState) -> dict:
    return dict(zip(tuple(a.bools) + tuple(a.ints), s.values))


# --- rules ----------------------------------------------------------------

def _successors(comp: _Compiled, ce: _CompiledEdge, s: MdpState) -> tuple:
    out = []
    for target, action, p, assign, resets in ce.outcomes:
        values = assign(s.values)
        clocks = s.clocks
        if resets:
            clocks = list(clocks)
            for slot in resets:
                clocks[slot] = 0
            clocks = tuple(clocks)
        out.append((MdpState(target, clocks, values), p, action))
    return tuple(out)


def _locate_error(comp: _Compiled, s: MdpState, exc: Exception):
    a = comp.a
    nu, iota = valuation(a, s), interpretation(a, s)
    for k, edge in enumerate(a.edges):
        if edge.source != s.location:
            continue
        try:
            E.satisfies(edge.guard, iota, nu)
        except E.EvalError as inner:
            return SemanticsError(f"edge #{k} from {edge.source}: guard evaluation failed: {inner}")
    return SemanticsError(f"in state {s}: {exc}")


def steps(a: Epdta, s: MdpState) -> tuple:
    """Steps(s) as a tuple of :class:`StepDistribution`, canonically ordered:
    Stop, Time, then enabled edges in declaration order."""
    comp = _compiled(a)
    cached = comp.cache.get(s)
    if cached is not None:
        return cached
    c = s.clocks
    t = c[comp.t_slot]
    if t >= comp.max_time:
        result = (StepDistribution("stop", None, ((MdpState(STOP, c, s.values), Fraction(1), EPSILON),)),)
    else:
        try:
            urgent, nonurgent, time_ok = comp.location_fns[s.location](c, s.values)
        except KeyError:
            raise SemanticsError(f"unknown location {s.location!r}") from None
        except (E.EvalError, ZeroDivisionError) as exc:
            raise _locate_error(comp, s, exc) from exc
        result = []
        if not urgent and time_ok and t + 1 <= comp.max_time:
            result.append(StepDistribution(
                "time", None, ((MdpState(s.location, tuple(x + 1 for x in c), s.values), Fraction(1), EPSILON),)))
        for k in urgent or nonurgent:
            ce = comp.edges[k]
            try:
                succ = _successors(comp, ce, s)
            except E.EvalError as exc:
                raise SemanticsError(f"edge #{k} from {s.location}: {exc}") from exc
            result.append(StepDistribution("urgent" if ce.urgent else "nonurgent", k, succ))
        result = tuple(result)
    if len(comp.cache) >= _CACHE_LIMIT:
        comp.cache.clear()
    comp.cache[s] = result
    return result


def sample_step(a: Epdta, s: MdpState, rng) -> tuple:
    """Resolve nondeterminism uniformly, then draw one outcome.

    ``rng`` only needs a ``random()`` method returning floats in [0, 1).  A
    draw is consumed for the choice only when there is more than one
    distribution, and for the outcome only when it has more than one branch.
    Returns ``(successor, action)``.
    """
    choices = steps(a, s)
    n = len(choices)
    if n == 0:
        raise DeadlockError(s)
    d = choices[0] if n == 1 else choices[min(int(rng.random() * n), n - 1)]
    outcomes = d.outcomes
    if len(outcomes) == 1:
        succ, _, action = outcomes[0]
    else:
        succ, _, action = outcomes[bisect.bisect_right(d.cumulative, rng.random())]
    return succ, action


# --- enumeration ----------------------------------------------------------

def default_state_cap() -> int:
    return int(os.environ.get(STATE_CAP_ENV, 10**6))


@dataclass
class MdpGraph:
    """Explicit reachable MDP.  ``choices[i]`` lists ``(rule, edge, {j: p})``."""

    automaton: Epdta
    states: list
    index: dict
    choices: list
    deadlocks: list = field(default_factory=list)

    @property
    def initial(self) -> MdpState:
        return self.states[0]

    def __len__(self):
        return len(self.states)

    def dump(self) -> str:
        """Text listing: a ``states`` block then a ``transitions`` block.

        Each state line is ``<id> <location> <clock>=<n>... <var>=<value>...``;
        each transition line is ``<id> <rule>[#edge] <succ>:<prob> ...``.
        """
        a = self.automaton
        clocks = tuple(a.clocks) + (GLOBAL_CLOCK,)
        names = tuple(a.bools) + tuple(a.ints)
        out = [f"# states {len(self.states)}"]
        for i, s in enumerate(self.states):
            fields = [f"{c}={v}" for c, v in zip(clocks, s.clocks)]
            fields += [f"{n}={('tt' if v else 'ff') if isinstance(v, bool) else v}" for n, v in zip(names, s.values)]
            out.append(f"{i} {s.location} " + " ".join(fields))
        out.append("# transitions")
        for i, dists in enumerate(self.choices):
            for rule, edge, dist in dists:
                tag = rule if edge is None else f"{rule}#{edge}"
                out.append(f"{i} {tag} " + " ".join(f"{j}:{_fmt_prob(p)}" for j, p in dist.items()))
        return "\n".join(out) + "\n"


def _fmt_prob(p) -> str:
    return f"{float(p):.12g}"


def enumerate_states(a: Epdta, horizon: int | None = None, cap: int | None = None,
                     start: MdpState | None = None) -> MdpGraph:
    """Breadth-first expansion of every state reachable from the initial state.

    ``horizon`` replaces ``max_time`` (it may not exceed it).  Deadlocked
    states are kept and listed in ``deadlocks`` rather than raising.
    """
    if horizon is not None:
        if horizon > a.max_time:
            raise ValueError(f"horizon {horizon} exceeds max_time {a.max_time}")
        if horizon != a.max_time:
            a = replace(a, max_time=horizon)
    cap = default_state_cap() if cap is None else cap
    init = start if start is not None else initial_state(a)
    states = [init]
    index = {init: 0}
    choices = []
    deadlocks = []
    queue = deque([init])
    while queue:
        s = queue.popleft()
        dists = []
        for d in steps(a, s):
            merged = {}
            for succ, p in d.merged().items():
                j = index.get(succ)
                if j is None:
                    if len(states) >= cap:
                        raise StateCapError(f"state cap {cap} exceeded")
                    j = index[succ] = len(states)
                    states.append(succ)
                    queue.append(succ)
                merged[j] = merged.get(j, 0) + p
            dists.append((d.rule, d.edge, merged))
        if not dists:
            deadlocks.append(index[s])
        choices.append(dists)
    return MdpGraph(a, states, index, choices, deadlocks)


# --- reachability ---------------------------------------------------------

def _predicate(target) -> Callable[[str], bool]:
    if callable(target):
        return target
    if isinstance(target, str):
        return lambda loc: loc == target
    names = frozenset(target)
    return lambda loc: loc in names


def _horizon_model(a: Epdta, horizon: int) -> Epdta:
    limit = min(a.max_time, horizon + 1)
    return a if limit == a.max_time else replace(a, max_time=limit)


def reach_probability(a: Epdta, target, horizon: int, cap: int | None = None):
    """Probability that a run visits a target location while ``t <= horizon``.

    Nondeterminism is resolved uniformly (as in :func:`sample_step`), which
    turns the MDP into a Markov chain.  Probability mass is pushed forward in
    topological order with exact rationals; a chain with discrete cycles
    falls back to a sparse linear solve and returns a float.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    is_target = _predicate(target)
    g = enumerate_states(_horizon_model(a, horizon), cap=cap)
    n = len(g.states)
    hit = [is_target(s.location) for s in g.states]
    absorbing = [hit[i] or g.states[i].location == STOP or not g.choices[i] for i in range(n)]

    rows = []
    for i in range(n):
        if absorbing[i]:
            rows.append({})
            continue
        k = len(g.choices[i])
        row: dict = {}
        for _, _, dist in g.choices[i]:
            for j, p in dist.items():
                row[j] = row.get(j, 0) + Fraction(p) / k
        rows.append(row)

    indegree = [0] * n
    for row in rows:
        for j in row:
            indegree[j] += 1
    order = [i for i in range(n) if indegree[i] == 0]
    for i in order:
        for j in rows[i]:
            indegree[j] -= 1
            if indegree[j] == 0:
                order.append(j)
    if len(order) < n:
        return _solve_cyclic(rows, hit, absorbing)

    mass = [Fraction(0)] * n
    mass[0] = Fraction(1)
    total = Fraction(0)
    for i in order:
        if hit[i]:
            total += mass[i]
        for j, p in rows[i].items():
            mass[j] += mass[i] * p
    return total


def _solve_cyclic(rows, hit, absorbing) -> float:
    import numpy as np
    from scipy.sparse import identity, lil_matrix
    from scipy.sparse.linalg import spsolve

    if hit[0]:
        return 1.0
    transient = [i for i in range(len(rows)) if not absorbing[i]]
    pos = {i: k for k, i in enumerate(transient)}
    m = len(transient)
    P = lil_matrix((m, m))
    b = np.zeros(m)
    for i in transient:
        for j, p in rows[i].items():
            if j in pos:
                P[pos[i], pos[j]] += float(p)
            elif hit[j]:
                b[pos[i]] += float(p)
    x = spsolve((identity(m) - P).tocsc(), b)
    return float(np.atleast_1d(x)[pos[0]])


def estimate_reach(a: Epdta, target, horizon: int, runs: int, rng, start: MdpState | None = None) -> int:
    """Monte Carlo counterpart of :func:`reach_probability`; returns the hit count."""
    is_target = _predicate(target)
    model = _horizon_model(a, horizon)
    init = start if start is not None else initial_state(model)
    hits = 0
    for _ in range(runs):
        s = init
        while True:
            loc = s.location
            if is_target(loc):
                hits += 1
                break
            if loc == STOP or not steps(model, s):
                break
            s, _ = sample_step(model, s, rng)
    return hits


def run_until(a: Epdta, s: MdpState, rng, stop: Callable[[MdpState], bool]) -> Iterable:
    """Yield ``(state, action)`` pairs from ``s`` until ``stop(state)`` holds."""
    while not stop(s):
        s, action = sample_step(a, s, rng)
        yield s, action
