"""Export every shipped model to PRISM and read it back.

    python3 demos/prism_roundtrip.py [outdir]
"""

import os
import sys

from epdta import prism_export
from epdta.automaton import load_file
from epdta.cli import model_path, shipped_models


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else None
    for name in shipped_models():
        a = load_file(model_path(name))
        rt = prism_export.round_trip(a)
        print(f"{name:8s} {rt.states:5d} states  isomorphic={rt.isomorphic}  reach agrees={rt.ok}")
        if outdir:
            os.makedirs(outdir, exist_ok=True)
            prism_export.write(a, os.path.join(outdir, f"{name}.nm"))


if __name__ == "__main__":
    main()
