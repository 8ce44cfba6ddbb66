"""Finite security lattices.

A lattice is declared as an element set plus Hasse edges ``(lower, upper)``.
Construction computes the reflexive-transitive closure, checks the lattice
axioms and tabulates join and meet, so every later query is a dict lookup.
"""

from __future__ import annotations

from itertools import product
from typing import Iterable, Sequence


class NotALattice(ValueError):
    pass


class ForeignLevel(KeyError):
    pass


class Lattice:
    """An immutable finite lattice of security levels (plain string names)."""

    __slots__ = ("elements", "edges", "bottom", "top", "_order", "_join", "_meet")

    def __init__(self, elements: Sequence[str], edges: Iterable[tuple[str, str]] = ()):
        elements = tuple(dict.fromkeys(elements))
        if not elements:
            raise NotALattice("empty element set")
        edges = tuple(edges)
        known = set(elements)
        for lo, hi in edges:
            for x in (lo, hi):
                if x not in known:
                    raise NotALattice(f"edge mentions undeclared element {x!r}")

        order = {(x, x) for x in elements} | set(edges)
        # Warshall closure
        for k in elements:
            for i in elements:
                if (i, k) not in order:
                    continue
                for j in elements:
                    if (k, j) in order:
                        order.add((i, j))
        for x, y in order:
            if x != y and (y, x) in order:
                raise NotALattice(f"cycle between {x!r} and {y!r}")

        join: dict[tuple[str, str], str] = {}
        meet: dict[tuple[str, str], str] = {}
        for a, b in product(elements, repeat=2):
            ub = [u for u in elements if (a, u) in order and (b, u) in order]
            least = [u for u in ub if all((u, v) in order for v in ub)]
            if len(least) != 1:
                raise NotALattice(f"{a!r} and {b!r} have no unique join")
            lb = [u for u in elements if (u, a) in order and (u, b) in order]
            greatest = [u for u in lb if all((v, u) in order for v in lb)]
            if len(greatest) != 1:
                raise NotALattice(f"{a!r} and {b!r} have no unique meet")
            join[a, b] = least[0]
            meet[a, b] = greatest[0]

        bottoms = [x for x in elements if all((x, y) in order for y in elements)]
        tops = [x for x in elements if all((y, x) in order for y in elements)]
        # a finite lattice always has both; kept as a guard
        if len(bottoms) != 1 or len(tops) != 1:
            raise NotALattice("no unique bottom/top")

        self.elements = elements
        self.edges = edges
        self.bottom = bottoms[0]
        self.top = tops[0]
        self._order = frozenset(order)
        self._join = join
        self._meet = meet

    def __contains__(self, level: object) -> bool:
        return (level, level) in self._order

    def leq(self, a: str, b: str) -> bool:
        if a not in self or b not in self:
            raise ForeignLevel(a if a not in self else b)
        return (a, b) in self._order

    def join(self, a: str, b: str) -> str:
        try:
            return self._join[a, b]
        except KeyError:
            raise ForeignLevel(a if a not in self else b) from None

    def meet(self, a: str, b: str) -> str:
        try:
            return self._meet[a, b]
        except KeyError:
            raise ForeignLevel(a if a not in self else b) from None

    def join_all(self, levels: Iterable[str]) -> str:
        acc = self.bottom
        for lv in levels:
            acc = self.join(acc, lv)
        return acc

    @property
    def order(self) -> frozenset[tuple[str, str]]:
        return self._order

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return set(self.elements) == set(other.elements) and self._order == other._order

    def __hash__(self) -> int:
        return hash((frozenset(self.elements), self._order))

    def __repr__(self) -> str:
        return f"Lattice({list(self.elements)!r}, {list(self.edges)!r})"


def validate(elements: Sequence[str], edges: Iterable[tuple[str, str]]) -> Lattice:
    """Close ``edges`` over ``elements`` and check the lattice axioms."""
    return Lattice(elements, edges)


def two_point() -> Lattice:
    return Lattice(("lo", "hi"), [("lo", "hi")])
