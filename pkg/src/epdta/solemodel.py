"""Solea solea life history: growth, weight, length classes, monthly
probability tables, and the per-individual automaton built from them.

Lengths inside the automaton are integer millimetres; the public growth and
weight functions work in centimetres and grams.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import yaml

from . import expr as E
from .automaton import EPSILON, Edge, Epdta, Outcome, check
from .semantics import MdpState

MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")

# Monthly natural mortality per class (rows 0..4+), January first.
MORTALITY = (
    (0.083, 0.078, 0.073, 0.068, 0.063, 0.058, 0.058, 0.053, 0.048, 0.043, 0.038, 0.033),
    (0.032, 0.031, 0.030, 0.023, 0.030, 0.028, 0.028, 0.028, 0.027, 0.026, 0.026, 0.025),
    (0.024, 0.024, 0.023, 0.023, 0.023, 0.023, 0.023, 0.022, 0.022, 0.022, 0.021, 0.021),
    (0.021,) * 12,
    (0.020, 0.020, 0.020, 0.020, 0.019, 0.019, 0.019, 0.019, 0.019, 0.019, 0.018, 0.018),
)
# Fishing at F = 0.2, in percent as published.
FISHING_F02_PERCENT = ((1.65,) * 12,) * 5
BREEDING = ((0.3, 0.25, 0.1, 0, 0, 0, 0, 0, 0, 0, 0.1, 0.25),) * 5
POPULATION = {
    2005: (169, 82, 36, 12, 4),
    2006: (92, 179, 43, 10, 1),
    2007: (205, 138, 72, 18, 1),
    2008: (117, 123, 61, 10, 6),
}
# Newborn females injected per month, one row per year of a four-year cycle.
BIRTHS = (
    (26, 21, 9, 0, 0, 0, 0, 0, 0, 0, 8, 21),
    (14, 12, 4, 0, 0, 0, 0, 0, 0, 0, 4, 12),
    (30, 25, 11, 0, 0, 0, 0, 0, 0, 0, 11, 25),
    (16, 15, 6, 0, 0, 0, 0, 0, 0, 0, 6, 15),
)


@dataclass(frozen=True)
class GrowthParams:
    l_inf: float = 39.6
    k: float | Callable[[int], float] = 0.44
    t0: float = -0.46
    age_unit: str = "years"

    def __post_init__(self):
        if self.l_inf <= 0:
            raise ValueError("l_inf must be positive")
        if not callable(self.k) and self.k <= 0:
            raise ValueError("k must be positive")
        if self.age_unit not in ("years", "months"):
            raise ValueError("age_unit must be 'years' or 'months'")

    @property
    def time_varying(self) -> bool:
        return callable(self.k)

    def k_at(self, t: int) -> float:
        k = self.k(t) if callable(self.k) else self.k
        if k <= 0:
            raise ValueError(f"k({t}) = {k} is not positive")
        return k


@dataclass(frozen=True)
class LengthWeightParams:
    a: float = 0.007
    b: float = 3.0638

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("length-weight parameters must be positive")


@dataclass(frozen=True)
class ClassTable:
    minima: tuple = (0.0, 18.4, 25.9, 30.8, 34.0)
    maxima: tuple = (18.3, 25.8, 30.7, 33.9, 39.6)
    labels: tuple = ("0", "1", "2", "3", "4+")

    def __post_init__(self):
        if not (len(self.minima) == len(self.maxima) == len(self.labels)) or not self.minima:
            raise ValueError("class table columns must have equal, non-zero length")
        if self.minima[0] != 0:
            raise ValueError("the first class must start at 0")
        mm_min = self.minima_mm
        mm_max = [_to_mm(x) for x in self.maxima]
        for i in range(len(mm_min)):
            if mm_min[i] > mm_max[i]:
                raise ValueError(f"class {self.labels[i]} is empty")
            if i and mm_min[i] != mm_max[i - 1] + 1:
                raise ValueError(f"class {self.labels[i]} is not contiguous with the previous class")

    @property
    def size(self) -> int:
        return len(self.minima)

    @property
    def minima_mm(self) -> tuple:
        return tuple(_to_mm(x) for x in self.minima)

    @property
    def upper_mm(self) -> int:
        return _to_mm(self.maxima[-1])

    def midpoint(self, i: int) -> float:
        return (self.minima[i] + self.maxima[i]) / 2


@dataclass(frozen=True, eq=False)
class ProbTable:
    """Class x calendar-month probabilities, cyclic over years.

    ``overrides`` maps ``(class, absolute_month)`` to a probability and wins
    over the cyclic value; absolute month 0 is the first simulated month.
    """

    values: np.ndarray
    overrides: Mapping[tuple, float] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != 12:
            raise ValueError(f"probability table must be classes x 12, got shape {values.shape}")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("probability table entries must lie in [0, 1]")
        for key, p in self.overrides.items():
            if not 0 <= p <= 1:
                raise ValueError(f"override {key} = {p} outside [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "overrides", dict(self.overrides))

    @classmethod
    def uniform(cls, p: float, classes: int = 5) -> "ProbTable":
        return cls(np.full((classes, 12), p))

    @classmethod
    def from_percent(cls, rows, overrides=None) -> "ProbTable":
        return cls(np.asarray(rows, dtype=float) / 100.0,
                   {k: v / 100.0 for k, v in (overrides or {}).items()})

    @property
    def classes(self) -> int:
        return self.values.shape[0]

    def at(self, cls: int, month: int, start_month: int = 0) -> float:
        if (cls, month) in self.overrides:
            return float(self.overrides[(cls, month)])
        return float(self.values[cls, (start_month + month) % 12])


@dataclass(frozen=True)
class FertilityRule:
    """Fertile once at least ``threshold`` months have passed since breeding."""

    threshold: int = 12

    def probability(self, months: int) -> float:
        return 1.0 if months >= self.threshold else 0.0


def _to_mm(length_cm: float) -> int:
    return E.round_half_away(Fraction(repr(float(length_cm))) * 10)


def vbgf_length(age: float, t: int = 0, p: GrowthParams = GrowthParams()) -> float:
    """Length in cm at ``age`` months; ``t`` is the absolute month selecting k."""
    if age < 0:
        raise ValueError("age must be non-negative")
    a = age / 12 if p.age_unit == "years" else age
    length = p.l_inf * (1 - math.exp(-p.k_at(t) * (a - p.t0)))
    return min(max(length, 0.0), p.l_inf)


def age_at_length(length: float, t: int = 0, p: GrowthParams = GrowthParams()) -> float:
    """Inverse of :func:`vbgf_length`, in months."""
    if not 0 <= length < p.l_inf:
        raise ValueError(f"length {length} has no finite age")
    a = p.t0 - math.log(1 - length / p.l_inf) / p.k_at(t)
    return max(a * 12 if p.age_unit == "years" else a, 0.0)


def weight(length: float, p: LengthWeightParams = LengthWeightParams()) -> float:
    """Weight in grams of a sole of ``length`` cm."""
    if length < 0:
        raise ValueError("length must be non-negative")
    return p.a * length ** p.b


def class_of(length: float, ct: ClassTable = ClassTable()) -> int:
    """Class index of a length in cm, resolved at 0.1 cm."""
    mm = _to_mm(length)
    return class_of_mm(mm, ct)


def class_of_mm(mm: int, ct: ClassTable = ClassTable()) -> int:
    if not 0 <= mm <= ct.upper_mm:
        raise ValueError(f"length {mm / 10} cm outside the class table")
    return bisect.bisect_right(ct.minima_mm, mm) - 1


def monthly_prob_from_annual_index(rate: float) -> float:
    """Monthly event probability from an annual instantaneous rate (F or M)."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return 1 - math.exp(-rate / 12)


# --- species configuration ------------------------------------------------

@dataclass(frozen=True)
class SpeciesConfig:
    name: str = "Solea solea"
    growth: GrowthParams = GrowthParams()
    length_weight: LengthWeightParams = LengthWeightParams()
    classes: ClassTable = ClassTable()
    mortality: ProbTable = field(default_factory=lambda: ProbTable(MORTALITY))
    fishing: ProbTable = field(default_factory=lambda: ProbTable.from_percent(FISHING_F02_PERCENT))
    breeding: ProbTable = field(default_factory=lambda: ProbTable(BREEDING))
    fertility: FertilityRule = FertilityRule()
    breeding_class0_zero: bool = True
    population: Mapping[int, tuple] = field(default_factory=lambda: dict(POPULATION))
    births: tuple = BIRTHS

    def breeding_table(self) -> ProbTable:
        if not self.breeding_class0_zero:
            return self.breeding
        values = np.array(self.breeding.values)
        values[0, :] = 0.0
        overrides = {k: v for k, v in self.breeding.overrides.items() if k[0] != 0}
        return ProbTable(values, overrides)

    def fishing_table(self, fishing_index: float | None = None) -> ProbTable:
        if fishing_index is None:
            return self.fishing
        return ProbTable.uniform(monthly_prob_from_annual_index(fishing_index), self.classes.size)

    def build(self, max_time: int, fishing_index: float | None = None, **kwargs) -> "SoleModel":
        return build_sole_model(
            self.mortality, self.fishing_table(fishing_index), self.breeding_table(), self.fertility,
            self.growth, self.classes, max_time, **kwargs)


def _table_from_config(node, classes, percent=False) -> ProbTable:
    rows = node["values"] if isinstance(node, Mapping) else node
    unit = node.get("unit", "probability") if isinstance(node, Mapping) else "probability"
    overrides = {}
    if isinstance(node, Mapping):
        for item in node.get("overrides", []) or []:
            overrides[(int(item["class"]), int(item["month"]))] = float(item["value"])
    if unit == "percent":
        return ProbTable.from_percent(rows, overrides)
    if unit != "probability":
        raise ValueError(f"unknown table unit {unit!r}")
    return ProbTable(np.asarray(rows, dtype=float), overrides)


def load_species_config(text: str) -> SpeciesConfig:
    """Read a species config (YAML); missing keys fall back to the defaults.

    Keys: ``name``, ``growth`` (l_inf, k, t0, age_unit), ``length_weight``
    (a, b), ``classes`` (list of {label, min, max}), ``mortality``,
    ``fishing``, ``breeding`` (each either a 5x12 list or a mapping with
    ``values``, optional ``unit: percent`` and ``overrides`` entries
    ``{class, month, value}``), ``fertility_threshold``,
    ``breeding_class0_zero``, ``population`` (year -> counts) and ``births``
    (4x12 list).
    """
    data = yaml.safe_load(text) or {}
    base = SpeciesConfig()
    kwargs = {}
    if "name" in data:
        kwargs["name"] = str(data["name"])
    if "growth" in data:
        kwargs["growth"] = replace(base.growth, **data["growth"])
    if "length_weight" in data:
        kwargs["length_weight"] = replace(base.length_weight, **data["length_weight"])
    if "classes" in data:
        rows = data["classes"]
        kwargs["classes"] = ClassTable(
            tuple(float(r["min"]) for r in rows), tuple(float(r["max"]) for r in rows),
            tuple(str(r.get("label", i)) for i, r in enumerate(rows)))
    n = kwargs.get("classes", base.classes).size
    for key in ("mortality", "fishing", "breeding"):
        if key in data:
            kwargs[key] = _table_from_config(data[key], n)
    if "fertility_threshold" in data:
        kwargs["fertility"] = FertilityRule(int(data["fertility_threshold"]))
    if "breeding_class0_zero" in data:
        kwargs["breeding_class0_zero"] = bool(data["breeding_class0_zero"])
    if "population" in data:
        kwargs["population"] = {int(y): tuple(int(c) for c in row) for y, row in data["population"].items()}
    if "births" in data:
        kwargs["births"] = tuple(tuple(int(c) for c in row) for row in data["births"])
    config = SpeciesConfig(**kwargs)
    for key in ("mortality", "fishing", "breeding"):
        if getattr(config, key).classes != config.classes.size:
            raise ValueError(f"{key} table has {getattr(config, key).classes} rows for {config.classes.size} classes")
    return config


def load_species_file(path) -> SpeciesConfig:
    with open(path, encoding="utf-8") as fh:
        return load_species_config(fh.read())


# --- automaton construction -------------------------------------------------

@dataclass(frozen=True, eq=False)
class SoleModel:
    """A built individual automaton plus what is needed to seed agents into it."""

    automaton: Epdta
    growth: GrowthParams
    length_weight: LengthWeightParams
    classes: ClassTable
    period: int
    absolute: bool
    start_month: int
    fertility: FertilityRule = FertilityRule()

    def location(self, cls: int) -> str:
        return f"class_{cls}"

    def class_index(self, location: str) -> int | None:
        if location.startswith("class_"):
            return int(location[6:])
        return None

    def month_value(self, month: int) -> int:
        """Value of ``mon`` for the absolute (0-based) simulated month ``month``."""
        return month if self.absolute else (self.start_month + month) % 12

    def length_mm(self, age: int, month: int = 0) -> int:
        return _to_mm(vbgf_length(age, month, self.growth))

    def state(self, age: int, month: int = 0, last_breed: int = 0) -> MdpState:
        a = self.automaton
        length = self.length_mm(age, month)
        values = {"M_c": False, "F_c": False, "R_c": False,
                  "age": age, "length": length, "lastB": last_breed, "mon": self.month_value(month)}
        for name, (lo, hi) in a.ints.items():
            if not lo <= values[name] <= hi:
                raise E.RangeError(f"{name} = {values[name]} outside [{lo}, {hi}]")
        cls = class_of_mm(length, self.classes)
        return MdpState(self.location(cls), (0,) * (len(a.clocks) + 1),
                        tuple(values[n] for n in tuple(a.bools) + tuple(a.ints)))

    def weight_g(self, length_mm: int) -> float:
        return weight(length_mm / 10, self.length_weight)


def _runs(values: Sequence[Fraction]) -> list:
    """Group consecutive equal values: [(lo, hi, value), ...]."""
    out = []
    for i, v in enumerate(values):
        if out and out[-1][2] == v:
            out[-1][1] = i
        else:
            out.append([i, i, v])
    return [tuple(r) for r in out]


def _prob(p: float) -> Fraction:
    return Fraction(repr(float(p)))


def build_sole_model(
    mortality: ProbTable,
    fishing: ProbTable,
    breeding: ProbTable,
    fertility: FertilityRule = FertilityRule(),
    growth: GrowthParams = GrowthParams(),
    classes: ClassTable = ClassTable(),
    max_time: int = 72,
    *,
    start_month: int = 0,
    initial_age: int = 0,
    initial_class: int | None = None,
    max_age: int | None = None,
    length_weight: LengthWeightParams = LengthWeightParams(),
    name: str = "sole",
) -> SoleModel:
    """Build the per-class check/update automaton for one individual.

    Each class location carries a mortality, a fishing and a reproduction
    check (one edge per run of months with equal probability), a monthly
    update guarded by all three check flags, and an urgent promotion to the
    next class once ``length`` reaches its minimum.
    """
    n = classes.size
    for label, table in (("mortality", mortality), ("fishing", fishing), ("breeding", breeding)):
        if table.classes != n:
            raise ValueError(f"{label} table has {table.classes} rows for {n} classes")
    absolute = bool(mortality.overrides or fishing.overrides or breeding.overrides or growth.time_varying)
    period = max_time if absolute else 12
    if max_age is None:
        max_age = 120 + max_time
    last_breed_max = max_age + fertility.threshold

    def column(table: ProbTable, cls: int) -> list:
        if absolute:
            return [_prob(table.at(cls, m, start_month)) for m in range(period)]
        return [_prob(table.values[cls, m]) for m in range(12)]

    if growth.time_varying:
        growth_rows = [[_to_mm(vbgf_length(age, m, growth)) for m in range(period)] for age in range(max_age + 1)]
        growth_table = E.FunctionTable.from_nested("vb", ((0, max_age), (0, period - 1)), growth_rows)
        next_length = "vb(age + 1, (mon + 1) % {})".format(period)
    else:
        growth_table = E.FunctionTable("vb", ((0, max_age),),
                                       tuple(_to_mm(vbgf_length(age, 0, growth)) for age in range(max_age + 1)))
        next_length = "vb(age + 1)"

    locations = tuple(f"class_{i}" for i in range(n)) + ("dead", "fished")
    bools = ("M_c", "F_c", "R_c")
    ints = {"age": (0, max_age), "length": (0, classes.upper_mm), "lastB": (0, last_breed_max),
            "mon": (0, period - 1)}
    decls = E.Declarations.of(("x",), bools, ints, (growth_table,))

    def guard(text):
        return E.parse_guard(text, decls)

    def assign(text):
        return E.parse_assignment(text, decls)

    def outcome(action, assignment, target, reset=()):
        return Outcome(action, assign(assignment), frozenset(reset), target)

    def month_guard(lo, hi):
        if lo == 0 and hi == period - 1:
            return ""
        if lo == hi:
            return f" & mon = {lo}"
        return f" & {lo} <= mon & mon <= {hi}"

    def check_edges(cls, table, flag, action, target, extra=""):
        out = []
        for lo, hi, p in _runs(column(table, cls)):
            dist = []
            if p > 0:
                dist.append((outcome(f"{action}_{cls}", "", target), p))
            if p < 1:
                dist.append((outcome(EPSILON, f"{flag} <- tt", f"class_{cls}"), 1 - p))
            out.append(Edge(f"class_{cls}", guard(f"x = 1 & ~{flag}{extra}{month_guard(lo, hi)}"), tuple(dist)))
        return out

    edges = []
    minima = classes.minima_mm
    threshold = fertility.threshold
    for i in range(n):
        here = f"class_{i}"
        edges += check_edges(i, mortality, "M_c", "dead", "dead")
        edges += check_edges(i, fishing, "F_c", "fish", "fished")
        edges.append(Edge(here, guard(f"x = 1 & ~R_c & lastB < {threshold}"),
                          ((outcome(EPSILON, "R_c <- tt", here), Fraction(1)),)))
        for lo, hi, p in _runs(column(breeding, i)):
            dist = []
            if p > 0:
                dist.append((outcome(f"breed_{i}", "R_c <- tt, lastB <- 0", here), p))
            if p < 1:
                dist.append((outcome(EPSILON, "R_c <- tt", here), 1 - p))
            edges.append(Edge(here, guard(f"x = 1 & ~R_c & {threshold} <= lastB{month_guard(lo, hi)}"),
                              tuple(dist)))
        update = (f"age <- age + 1, lastB <- lastB + 1, length <- {next_length}, "
                  f"mon <- (mon + 1) % {period}, M_c <- ff, F_c <- ff, R_c <- ff")
        edges.append(Edge(here, guard("x = 1 & M_c & F_c & R_c"),
                          ((outcome(EPSILON, update, here, ("x",)), Fraction(1)),)))
        if i + 1 < n:
            edges.append(Edge(here, guard(f"{minima[i + 1]} <= length"),
                              ((outcome(EPSILON, "", f"class_{i + 1}"), Fraction(1)),), urgent=True))

    init_length = _to_mm(vbgf_length(initial_age, 0, growth))
    init_class = class_of_mm(init_length, classes) if initial_class is None else initial_class
    init_values = {"M_c": False, "F_c": False, "R_c": False, "age": initial_age, "length": init_length,
                   "lastB": 0, "mon": 0 if absolute else start_month % 12}
    automaton = check(Epdta(
        locations=locations, clocks=("x",), bools=bools, ints=ints, edges=tuple(edges),
        initial=f"class_{init_class}", init_values=init_values,
        invariants={f"class_{i}": E.parse_clock("x <= 1", decls) for i in range(n)},
        max_time=max_time, tables={"vb": growth_table}, name=name,
    ))
    return SoleModel(automaton, growth, length_weight, classes, period, absolute, start_month, fertility)


def build_sole_epdta(mortality: ProbTable, fishing: ProbTable, breeding: ProbTable,
                     fertility: FertilityRule = FertilityRule(), growth: GrowthParams = GrowthParams(),
                     classes: ClassTable = ClassTable(), max_time: int = 72, **kwargs) -> Epdta:
    return build_sole_model(mortality, fishing, breeding, fertility, growth, classes, max_time, **kwargs).automaton


def reduced_sole_model(max_time: int = 6, initial_age: int = 9, fishing_index: float = 0.2) -> SoleModel:
    """A two-class reduction (below/above 18.4 cm) of the default sole, for exhaustive checks."""
    classes = ClassTable((0.0, 18.4), (18.3, 39.6), ("0", "1+"))
    mortality = ProbTable(np.array(MORTALITY[:2]))
    fishing = ProbTable.uniform(monthly_prob_from_annual_index(fishing_index), 2)
    breeding = ProbTable(np.array([[0.0] * 12, BREEDING[1]]))
    return build_sole_model(mortality, fishing, breeding, FertilityRule(), GrowthParams(), classes, max_time,
                            initial_age=initial_age, max_age=initial_age + max_time + 1, name="sole2")
