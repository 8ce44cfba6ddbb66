"""Reference implementations used to cross-check the engine.

They deliberately take different routes from the library code:

* ``subtype_by_valuations`` decides subtyping of recursion-free types by
  brute force over all monotone two-valued valuations of the atoms (a
  distributive lattice inequality holds iff it holds in every homomorphism
  to the two-element lattice). The atom order is decided recursively by the
  oracle itself.
* ``taint_by_reachability`` reads nonces and peers off rendered text and
  closes the peer graph with Warshall's algorithm.
* ``lattice_closure`` recomputes the order of a Hasse diagram by depth-first
  search.
"""

from __future__ import annotations

import re
from itertools import product

from secadapt.render import render_message, render_monitor, render_process
from secadapt.syntax import TAnd, TEnd, TIn, TOr, TOut, TRec, TVar


def _atoms(t, acc: set) -> None:
    if isinstance(t, (TAnd, TOr)):
        for o in t.operands:
            _atoms(o, acc)
    elif isinstance(t, (TIn, TOut)):
        acc.add(t)
    elif isinstance(t, (TRec, TVar)):
        raise ValueError("the valuation oracle handles recursion-free types only")


def _value(t, up: frozenset) -> bool:
    if isinstance(t, TEnd):
        return True
    if isinstance(t, TAnd):
        return all(_value(o, up) for o in t.operands)
    if isinstance(t, TOr):
        return any(_value(o, up) for o in t.operands)
    return t in up


def _atom_leq(a, b) -> bool:
    return (
        type(a) is type(b)
        and (a.peer, a.label, a.sort) == (b.peer, b.label, b.sort)
        and subtype_by_valuations(a.cont, b.cont)
    )


def subtype_by_valuations(t1, t2) -> bool:
    atoms: set = set()
    _atoms(t1, atoms)
    _atoms(t2, atoms)
    atoms = sorted(atoms, key=repr)
    below = {(a, b) for a in atoms for b in atoms if _atom_leq(a, b)}
    for bits in product((False, True), repeat=len(atoms)):
        up = frozenset(a for a, bit in zip(atoms, bits) if bit)
        # only upward-closed sets give monotone valuations
        if any(a in up and b not in up for a, b in below):
            continue
        if _value(t1, up) and not _value(t2, up):
            return False
    return True


_PEER = re.compile(r"(\w+)[?!]\{")


def taint_by_reachability(members: dict, queue, nonce_index: int) -> set:
    names = sorted(members)
    token = re.compile(rf"#{nonce_index}(?!\d)")
    seed = {p for p in names if token.search(render_process(members[p].process))}
    for m in queue:
        text = render_message(m)
        if token.search(text.split("(", 1)[1]) and m.receiver in members:
            seed.add(m.receiver)
    n = len(names)
    idx = {p: i for i, p in enumerate(names)}
    reach = [[i == j for j in range(n)] for i in range(n)]
    for p in names:
        for peer in _PEER.findall(render_monitor(members[p].monitor)):
            if peer in idx:
                reach[idx[p]][idx[peer]] = True
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                for j in range(n):
                    if reach[k][j]:
                        reach[i][j] = True
    return {p for p in names if any(reach[idx[p]][idx[s]] for s in seed)}


def lattice_closure(elements, edges) -> set:
    succ = {x: [] for x in elements}
    for lo, hi in edges:
        succ[lo].append(hi)
    order = set()
    for x in elements:
        stack, seen = [x], {x}
        while stack:
            y = stack.pop()
            order.add((x, y))
            for z in succ[y]:
                if z not in seen:
                    seen.add(z)
                    stack.append(z)
    return order
