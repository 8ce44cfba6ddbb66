"""The bundled example scenarios."""

from __future__ import annotations

from pathlib import Path

DIRECTORY = Path(__file__).parent
NAMES = ("two-party-ok", "leak-write", "leak-read", "refresh-chain", "shop")


def path(name: str) -> Path:
    return DIRECTORY / f"{name}.scn"


def load(name: str):
    from ..parser import load_scenario

    return load_scenario(path(name))


def load_all() -> dict:
    return {n: load(n) for n in NAMES}
