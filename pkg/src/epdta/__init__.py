"""Extended probabilistic discrete timed automata, their MDP semantics, a
PRISM exporter and an individual-based Solea solea population simulator."""

__version__ = "0.1.0"

from .automaton import Edge, Epdta, ModelError, Outcome, dump, load, load_file, validate  # noqa: E402
from .semantics import (  # noqa: E402
    MdpState, enumerate_states, initial_state, reach_probability, sample_step, steps,
)

__all__ = [
    "__version__", "Edge", "Epdta", "ModelError", "Outcome", "dump", "load", "load_file", "validate",
    "MdpState", "enumerate_states", "initial_state", "reach_probability", "sample_step", "steps",
]
