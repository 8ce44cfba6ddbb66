"""Scenario container: lattice, choreographies, process repository and run
settings, as read from a scenario file."""

from __future__ import annotations

from dataclasses import dataclass, field

from .lattice import Lattice
from .syntax import Process, ProcessType, SecurityGlobalType

RULES = ("Init", "UpLev", "In", "Out", "InGlob", "OutGlob", "Refresh", "InLoc", "OutLoc")


@dataclass(frozen=True)
class RepoEntry:
    name: str
    process: Process
    type: ProcessType
    sorts: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "terminate"  # terminate | restart | template
    template: str | None = None


@dataclass(frozen=True)
class Strategy:
    kind: str = "random"  # random | exhaustive | scripted
    seed: int = 0
    depth: int = 200
    cap: int = 200_000
    priority: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("random", "exhaustive", "scripted"):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        for rule in self.priority:
            if rule not in RULES:
                raise ValueError(f"unknown rule {rule!r} in priority list")


@dataclass(frozen=True)
class Scenario:
    lattice: Lattice
    globals: tuple[tuple[str, SecurityGlobalType], ...]
    repo: tuple[RepoEntry, ...] = ()
    policy: PolicySpec = PolicySpec()
    strategy: Strategy = Strategy()
    start: tuple[str, ...] = ()
    name: str | None = field(default=None, compare=False)

    def global_named(self, name: str) -> SecurityGlobalType:
        for n, sg in self.globals:
            if n == name:
                return sg
        raise KeyError(name)

    @property
    def initiators(self) -> tuple[SecurityGlobalType, ...]:
        return tuple(self.global_named(n) for n in self.start)
