"""Multi-agent population simulator.

A :class:`Registry` owns one individual automaton per living sole.  Each
month every agent takes one time step and then keeps stepping until its
three checks and the monthly update are done; the registry then counts,
injects the month's newborns and moves on.  Random draws come from a
counter-based stream keyed on ``(seed, agent id, month)``, so the order in
which agents are processed never changes the outcome.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import random
import struct
import tempfile
from dataclasses import asdict, dataclass, field

from .automaton import EPSILON, STOP
from .semantics import DeadlockError, MdpState, sample_step, steps
from .solemodel import SoleModel, SpeciesConfig, age_at_length, class_of_mm

_MASK64 = (1 << 64) - 1


class SimulationError(RuntimeError):
    pass


class CounterStream:
    """Uniform draws in [0, 1) from BLAKE2b over ``(key, block counter)``."""

    __slots__ = ("_key", "_prefix", "_block", "_buf", "_pos")

    def __init__(self, seed: int, *key: int):
        self._key = (seed & _MASK64).to_bytes(8, "little")
        self._prefix = struct.pack(f"<{len(key)}q", *key)
        self._block = 0
        self._buf = ()
        self._pos = 0

    def random(self) -> float:
        if self._pos == len(self._buf):
            digest = hashlib.blake2b(self._prefix + self._block.to_bytes(8, "little"),
                                     key=self._key, digest_size=64).digest()
            self._buf = struct.unpack("<8Q", digest)
            self._block += 1
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return (x >> 11) * (1.0 / 9007199254740992.0)


@dataclass
class SimConfig:
    species: SpeciesConfig = field(default_factory=SpeciesConfig)
    initial_population: tuple | None = None
    initial_year: int = 2005
    births: tuple | None = None
    fishing_index: float | None = None
    duration: int = 72
    seed: int = 0
    start_month: int = 0
    halve_initial: bool = False
    shuffle: int | None = None
    output: str | None = None

    def population(self) -> tuple:
        if self.initial_population is not None:
            counts = tuple(self.initial_population)
        else:
            try:
                counts = tuple(self.species.population[self.initial_year])
            except KeyError:
                raise ValueError(f"no population row for year {self.initial_year}") from None
        return tuple(c // 2 for c in counts) if self.halve_initial else counts

    def birth_table(self) -> tuple:
        return tuple(tuple(r) for r in (self.births if self.births is not None else self.species.births))

    def validate(self) -> None:
        n = self.species.classes.size
        pop = self.population()
        if len(pop) != n:
            raise ValueError(f"initial population has {len(pop)} classes, species has {n}")
        if any(c < 0 for c in pop):
            raise ValueError("initial population counts must be non-negative")
        table = self.birth_table()
        if not table or any(len(row) != 12 for row in table):
            raise ValueError("birth table needs rows of 12 monthly counts")
        if any(c < 0 for row in table for c in row):
            raise ValueError("birth counts must be non-negative")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        if not 0 <= self.start_month < 12:
            raise ValueError("start_month must be in 0..11")
        if self.fishing_index is not None and self.fishing_index < 0:
            raise ValueError("fishing index must be non-negative")

    def digest(self) -> str:
        """Stable hash of everything that influences the statistics."""
        sp = self.species
        payload = {
            "species": repr((sp.name, sp.growth, sp.length_weight, sp.classes, sp.fertility,
                             sp.breeding_class0_zero, sp.mortality.values.tolist(), sorted(sp.mortality.overrides.items()),
                             sp.fishing.values.tolist(), sorted(sp.fishing.overrides.items()),
                             sp.breeding.values.tolist(), sorted(sp.breeding.overrides.items()))),
            "population": self.population(), "births": self.birth_table(), "F": self.fishing_index,
            "duration": self.duration, "start_month": self.start_month, "halve": self.halve_initial,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class AgentRecord:
    id: int
    state: MdpState
    month: int
    status: str = "alive"
    events: list = field(default_factory=list)


@dataclass(frozen=True)
class SimStats:
    month: int
    population: tuple
    biomass_kg: float
    deaths: tuple
    fished: tuple
    breeds: tuple
    newborns: int

    @property
    def living(self) -> int:
        return sum(self.population)

    def row(self) -> dict:
        out = {"month": self.month}
        out.update({f"class_{i}": c for i, c in enumerate(self.population)})
        out.update(biomass_kg=f"{self.biomass_kg:.6f}", deaths=sum(self.deaths), fished=sum(self.fished),
                   breeds=sum(self.breeds), newborns=self.newborns)
        return out


class Registry:
    """Roster of agents plus the monthly barrier protocol."""

    def __init__(self, model: SoleModel, seed: int = 0, shuffle: int | None = None):
        self.model = model
        self.automaton = model.automaton
        self.seed = seed
        self.shuffle = shuffle
        self.roster: dict[int, AgentRecord] = {}
        self.month = 0
        self.stats: list[SimStats] = []
        self._next_id = 0
        self._newborns = 0
        n = model.classes.size
        self._loc_class = {model.location(i): i for i in range(n)}
        self._weights = {}
        self._length_slot = len(self.automaton.bools) + list(self.automaton.ints).index("length")

    def add(self, age: int, last_breed: int) -> int:
        state = self.model.state(age, self.month, last_breed)
        rec = AgentRecord(self._next_id, state, self.month)
        self.roster[rec.id] = rec
        self._next_id += 1
        return rec.id

    def populate(self, counts) -> None:
        """Register initial agents, aged from the midpoint length of their class."""
        for cls, count in enumerate(counts):
            age = self.initial_age(cls)
            last_breed = age if cls == 0 else self.model.fertility.threshold
            for _ in range(count):
                self.add(age, last_breed)

    def initial_age(self, cls: int) -> int:
        m = self.model
        age = max(round(age_at_length(m.classes.midpoint(cls), 0, m.growth)), 0)
        # Nudge the rounded age back inside the class if rounding crossed a boundary.
        for candidate in sorted(range(max(age - 24, 0), age + 25), key=lambda a: (abs(a - age), a)):
            if class_of_mm(m.length_mm(candidate), m.classes) == cls:
                return candidate
        raise SimulationError(f"no age maps into class {cls}")

    def _advance(self, rec: AgentRecord) -> None:
        a = self.automaton
        stream = CounterStream(self.seed, rec.id, self.month)
        s = rec.state
        events = []
        started = False
        while True:
            choices = steps(a, s)
            if len(choices) == 1 and choices[0].rule == "time":
                if started:
                    break
                started = True
            elif not choices:
                raise DeadlockError(f"agent {rec.id} deadlocked in {s}")
            s, action = sample_step(a, s, stream)
            if action != EPSILON:
                events.append(action)
            if s.location == STOP:
                raise SimulationError(f"agent {rec.id} ran past the automaton horizon")
        rec.state = s
        rec.events = events
        rec.month += 1
        if s.location not in self._loc_class:
            rec.status = s.location

    def step_month(self, births: int) -> SimStats:
        order = list(self.roster)
        if self.shuffle is not None:
            random.Random(self.shuffle * 1_000_003 + self.month).shuffle(order)
        for aid in order:
            rec = self.roster[aid]
            if rec.month != self.month:
                raise SimulationError(f"agent {aid} is at month {rec.month}, registry at {self.month}")
            self._advance(rec)
        self.month += 1
        if any(rec.month != self.month for rec in self.roster.values()):
            raise SimulationError("barrier violated: an agent did not report this month")
        n = self.model.classes.size
        deaths, fished, breeds = [0] * n, [0] * n, [0] * n
        counters = {"dead": deaths, "fish": fished, "breed": breeds}
        for rec in self.roster.values():
            for ev in rec.events:
                kind, _, cls = ev.rpartition("_")
                counters[kind][int(cls)] += 1
        for aid in [aid for aid, rec in self.roster.items() if rec.status != "alive"]:
            del self.roster[aid]
        injected = self.inject_newborns(births)
        row = self.census(tuple(deaths), tuple(fished), tuple(breeds), injected)
        self.stats.append(row)
        return row

    def inject_newborns(self, count: int) -> int:
        for _ in range(count):
            self.add(0, 0)
        return count

    def census(self, deaths=None, fished=None, breeds=None, newborns: int = 0) -> SimStats:
        n = self.model.classes.size
        pop = [0] * n
        grams = 0.0
        for rec in self.roster.values():
            pop[self._loc_class[rec.state.location]] += 1
            mm = rec.state.values[self._length_slot]
            w = self._weights.get(mm)
            if w is None:
                w = self._weights[mm] = self.model.weight_g(mm)
            grams += w
        zero = (0,) * n
        return SimStats(self.month, tuple(pop), grams / 1000.0, deaths or zero, fished or zero, breeds or zero,
                        newborns)


def births_for(table, month: int, start_month: int = 0) -> int:
    """Newborns for the simulated month ``month`` (1-based); rows cycle every len(table) years."""
    offset = start_month + month - 1
    year, cal = divmod(offset, 12)
    return table[year % len(table)][cal]


def run(config: SimConfig) -> list[SimStats]:
    """Simulate ``config.duration`` months; row 0 is the initial census."""
    config.validate()
    model = config.species.build(config.duration + 1, config.fishing_index, start_month=config.start_month)
    reg = Registry(model, config.seed, config.shuffle)
    reg.populate(config.population())
    reg.stats.append(reg.census())
    table = config.birth_table()
    for m in range(1, config.duration + 1):
        reg.step_month(births_for(table, m, config.start_month))
    return reg.stats


# --- output ------------------------------------------------------------------

def columns(n_classes: int) -> list:
    return (["month"] + [f"class_{i}" for i in range(n_classes)]
            + ["biomass_kg", "deaths", "fished", "breeds", "newborns"])


def to_csv(series: list[SimStats]) -> str:
    buf = io.StringIO()
    n = len(series[0].population) if series else 5
    writer = csv.DictWriter(buf, fieldnames=columns(n), lineterminator="\n")
    writer.writeheader()
    for row in series:
        writer.writerow(row.row())
    return buf.getvalue()


def to_jsonl(series: list[SimStats]) -> str:
    return "".join(json.dumps(asdict(row)) + "\n" for row in series)


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
