"""Command-line interface: ``epdta <subcommand> ...``.

Exit codes: 0 success, 1 invalid input (model, config or arguments),
2 runtime failure (deadlock, state cap, simulation error).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from importlib import resources

import yaml

from . import __version__
from . import automaton as A
from . import expr as E
from . import prism_export, semantics, sim, solemodel

log = logging.getLogger("epdta")


class UsageError(Exception):
    pass


def model_path(name: str) -> str:
    """A model file path, or the name of a shipped model (``fig1``, ``chain03``...)."""
    if os.path.exists(name):
        return name
    shipped = resources.files("epdta") / "models" / (name if name.endswith(".epdta") else name + ".epdta")
    if shipped.is_file():
        return str(shipped)
    raise UsageError(f"no such model file or shipped model: {name}")


def shipped_models() -> list:
    root = resources.files("epdta") / "models"
    return sorted(p.name[:-6] for p in root.iterdir() if p.name.endswith(".epdta"))


def species_path(path: str | None) -> str:
    if path is None:
        return str(resources.files("epdta") / "models" / "sole.cfg")
    if os.path.exists(path):
        return path
    shipped = resources.files("epdta") / "models" / path
    if os.sep not in path and shipped.is_file():
        return str(shipped)
    raise UsageError(f"no such species config: {path}")


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(out: str, **fields) -> str:
    path = out + ".manifest.json"
    payload = {"tool": "epdta", "version": __version__, **fields}
    sim.atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _write_text(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        sim.atomic_write(out, text)


# --- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg_path = species_path(args.species)
    species = solemodel.load_species_file(cfg_path)
    config = sim.SimConfig(
        species=species, fishing_index=args.f, duration=args.months, seed=args.seed,
        initial_year=args.year, start_month=args.start_month, halve_initial=args.halve_initial,
        output=args.out,
    )
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    log.info("simulating %d months, F=%s, seed=%d", args.months, args.f, args.seed)
    series = sim.run(config)
    sim.atomic_write(args.out, sim.to_csv(series))
    if args.jsonl:
        sim.atomic_write(args.jsonl, sim.to_jsonl(series))
    write_manifest(args.out, command="simulate", seed=args.seed, fishing_index=args.f, months=args.months,
                   species=os.path.basename(cfg_path), species_sha256=_sha256_file(cfg_path),
                   config_sha256=config.digest())
    last = series[-1]
    print(f"month {last.month}: population {last.living}, biomass {last.biomass_kg:.3f} kg -> {args.out}")
    return 0


def cmd_enumerate(args) -> int:
    a = A.load_file(model_path(args.model))
    g = semantics.enumerate_states(a, horizon=args.horizon, cap=args.cap)
    _write_text(args.out, g.dump())
    edges = sum(len(c) for c in g.choices)
    print(f"{len(g.states)} states, {edges} distributions, {len(g.deadlocks)} deadlocks", file=sys.stderr)
    for i in g.deadlocks:
        print(f"deadlock: state {i} {g.states[i]}", file=sys.stderr)
    return 0


def cmd_reach(args) -> int:
    a = A.load_file(model_path(args.model))
    targets = [t.strip() for t in args.target.split(",") if t.strip()]
    unknown = [t for t in targets if t not in a.locations and t != A.STOP]
    if unknown:
        raise UsageError(f"unknown target location(s): {', '.join(unknown)}")
    p = semantics.reach_probability(a, targets, args.horizon, cap=args.cap)
    print(f"{float(p):.12g}")
    if args.exact:
        print(p)
    return 0


def cmd_export(args) -> int:
    path = model_path(args.model)
    a = A.load_file(path)
    if args.max_time is not None:
        a = A.check(dataclasses.replace(a, max_time=args.max_time))
    text = prism_export.export(a)
    _write_text(args.out, text)
    if args.out and args.out != "-":
        write_manifest(args.out, command="export-prism", model=os.path.basename(path),
                       model_sha256=prism_export.source_hash(a))
    return 0


def cmd_validate(args) -> int:
    if args.model is None and args.species is None:
        raise UsageError("validate needs --model and/or --species")
    ok = True
    if args.model is not None:
        path = model_path(args.model)
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            a = A.load(text)
            print(f"{path}: ok ({len(a.locations)} locations, {len(a.edges)} edges)")
        except A.ModelError as exc:
            ok = False
            for d in exc.diagnostics:
                print(f"{path}: {d}", file=sys.stderr)
    if args.species is not None:
        path = species_path(args.species)
        try:
            sp = solemodel.load_species_file(path)
            model = sp.build(max_time=args.months + 1)
            print(f"{path}: ok ({sp.classes.size} classes, {len(model.automaton.edges)} edges)")
        except (ValueError, TypeError, A.ModelError) as exc:
            ok = False
            print(f"{path}: {exc}", file=sys.stderr)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epdta", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the population simulator and write monthly statistics")
    p.add_argument("--species", help="species config (YAML); defaults to the shipped sole.cfg")
    p.add_argument("--f", type=float, default=None, help="annual fishing index; default: the config's table")
    p.add_argument("--months", type=int, default=72)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--year", type=int, default=2005, help="initial population row")
    p.add_argument("--start-month", type=int, default=0, help="calendar month of the first step, 0 = January")
    p.add_argument("--halve-initial", action="store_true", help="halve the initial population (females only)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--jsonl", help="optional JSON-lines output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enumerate", help="list every reachable MDP state")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, help="override max_time (not above it)")
    p.add_argument("--cap", type=int, help=f"state cap (default ${semantics.STATE_CAP_ENV} or 10^6)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("reach", help="probability of visiting a location within a horizon")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True, help="location name, or a comma-separated list")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--cap", type=int)
    p.add_argument("--exact", action="store_true", help="also print the exact rational")
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("export-prism", help="write the automaton as a PRISM MDP (.nm)")
    p.add_argument("--model", required=True)
    p.add_argument("--max-time", type=int, help="override MAX_TIME")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("validate", help="check a model file and/or a species config")
    p.add_argument("--model")
    p.add_argument("--species")
    p.add_argument("--months", type=int, default=72, help="horizon used to build the species automaton")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (semantics.SemanticsError, sim.SimulationError, prism_export.PrismError, E.EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, A.ModelError, E.ExprError, yaml.YAMLError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

if __name__ == "__main__":
    sys.exit(main())
