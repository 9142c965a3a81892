"""The three fishing scenarios over six years, averaged over seeds.

    python3 demos/scenarios.py [seeds]
"""

import sys

import numpy as np

from epdta import sim

SCENARIOS = (0.0, 0.2, 1.2)


def summarise(f, seeds, halve):
    runs = [sim.run(sim.SimConfig(fishing_index=f, seed=s, halve_initial=halve)) for s in range(seeds)]
    biomass = np.array([[row.biomass_kg for row in series] for series in runs])
    adults = np.array([[sum(row.population[1:]) for row in series] for series in runs])
    return biomass.mean(axis=0), adults.mean(axis=0)


def main():
    seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 10
    for halve in (False, True):
        print(f"initial population {'halved' if halve else 'as tabulated'} ({seeds} seeds)")
        print("   F   month0  month24  month48  month72  adults@30")
        for f in SCENARIOS:
            biomass, adults = summarise(f, seeds, halve)
            print(f"{f:4.1f} " + " ".join(f"{biomass[m]:8.2f}" for m in (0, 24, 48, 72)) + f" {adults[30]:10.1f}")
        print()


if __name__ == "__main__":
    main()
