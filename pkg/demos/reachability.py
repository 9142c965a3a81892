"""Exact reachability on the shipped models, checked against sampling.

    python3 demos/reachability.py
"""

import random

from epdta.solemodel import reduced_sole_model
from epdta import semantics as S
from epdta.cli import model_path
from epdta.automaton import load_file

CASES = [("fig1", "l2", 4), ("chain03", "dead", 5), ("race", "right", 6), ("counter", "halt", 2)]


def main():
    rng = random.Random(0)
    runs = 20000
    for name, target, horizon in CASES:
        a = load_file(model_path(name))
        p = S.reach_probability(a, target, horizon)
        est = S.estimate_reach(a, target, horizon, runs, rng) / runs
        print(f"{name:8s} P(reach {target} by t={horizon}) = {p} ~ {float(p):.5f}   sampled {est:.5f}")

    # The two-class sole reduction: probability of leaving the population within six months.
    sole = reduced_sole_model().automaton
    for h in range(1, 7):
        p = S.reach_probability(sole, ("dead", "fished"), h)
        print(f"sole2    P(dead or fished by month {h}) = {float(p):.5f}")


if __name__ == "__main__":
    main()
