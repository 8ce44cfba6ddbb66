"""Security-monitored, self-adaptive multiparty choreographies."""

from .harness import check_invariants, explore, run, run_random, typecheck_scenario
from .lattice import Lattice
from .parser import load_scenario, parse_scenario
from .projection import project
from .semantics import Engine
from .typesys import adequate, subtype, synthesize

__all__ = [
    "Lattice", "Engine", "parse_scenario", "load_scenario", "project", "synthesize", "subtype", "adequate",
    "run", "run_random", "explore", "check_invariants", "typecheck_scenario",
]
