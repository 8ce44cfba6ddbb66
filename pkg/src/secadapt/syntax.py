"""Abstract syntax for global types, monitors, process types, processes and
expressions, plus the structural helpers shared by every later stage
(participants, well-formedness checks, unfolding, alpha-normal forms).

All nodes are frozen dataclasses, so terms are hashable and can be shared.
Branching nodes keep their branches as a tuple of ``(label, sort, cont)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

SORTS = ("nat", "bool")

Branches = tuple  # tuple[tuple[str, str, <node>], ...]


# -- global types -----------------------------------------------------------


@dataclass(frozen=True)
class Comm:
    sender: str
    receiver: str
    branches: Branches


@dataclass(frozen=True)
class GVar:
    name: str


@dataclass(frozen=True)
class GRec:
    var: str
    body: "GlobalType"


@dataclass(frozen=True)
class GEnd:
    pass


GlobalType = Union[Comm, GVar, GRec, GEnd]


@dataclass(frozen=True)
class SecurityGlobalType:
    g: GlobalType
    levels: tuple[tuple[str, str], ...]
    name: str | None = field(default=None, compare=False)

    @classmethod
    def of(cls, g: GlobalType, levels: dict[str, str], name: str | None = None) -> "SecurityGlobalType":
        return cls(g, tuple(sorted(levels.items())), name)

    @property
    def level_map(self) -> dict[str, str]:
        return dict(self.levels)


# -- monitors ---------------------------------------------------------------


@dataclass(frozen=True)
class MIn:
    peer: str
    branches: Branches


@dataclass(frozen=True)
class MOut:
    peer: str
    branches: Branches


@dataclass(frozen=True)
class MVar:
    name: str


@dataclass(frozen=True)
class MRec:
    var: str
    body: "Monitor"


@dataclass(frozen=True)
class MEnd:
    pass


Monitor = Union[MIn, MOut, MVar, MRec, MEnd]


# -- process types ----------------------------------------------------------


@dataclass(frozen=True)
class TIn:
    peer: str
    label: str
    sort: str
    cont: "ProcessType"


@dataclass(frozen=True)
class TOut:
    peer: str
    label: str
    sort: str
    cont: "ProcessType"


@dataclass(frozen=True)
class TAnd:
    operands: tuple


@dataclass(frozen=True)
class TOr:
    operands: tuple


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class TRec:
    var: str
    body: "ProcessType"


@dataclass(frozen=True)
class TEnd:
    pass


ProcessType = Union[TIn, TOut, TAnd, TOr, TVar, TRec, TEnd]


# -- values and expressions -------------------------------------------------


@dataclass(frozen=True)
class Value:
    payload: Union[bool, int]
    level: str

    @property
    def sort(self) -> str:
        return "bool" if type(self.payload) is bool else "nat"


@dataclass(frozen=True)
class Nonce:
    index: int


ExtendedValue = Union[Value, Nonce]


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class NonceRef:
    index: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class UnOp:
    op: str
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


Expression = Union[Lit, NonceRef, Var, UnOp, BinOp]

BINOPS = ("+", "-", "<", "=", "and", "or")
UNOPS = ("not",)


def as_expr(u: ExtendedValue) -> Expression:
    return NonceRef(u.index) if isinstance(u, Nonce) else Lit(u)


# -- channels and processes -------------------------------------------------


@dataclass(frozen=True)
class UserChannel:
    name: str


@dataclass(frozen=True)
class SessionChannel:
    session: str
    participant: str


Channel = Union[UserChannel, SessionChannel]


@dataclass(frozen=True)
class Nil:
    pass


@dataclass(frozen=True)
class Recv:
    chan: Channel
    peer: str
    label: str
    var: str
    sort: str | None
    cont: "Process"


@dataclass(frozen=True)
class Send:
    chan: Channel
    peer: str
    label: str
    expr: Expression
    sort: str | None
    cont: "Process"


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PRec:
    var: str
    body: "Process"


@dataclass(frozen=True)
class Cond:
    test: Expression
    then: "Process"
    else_: "Process"


@dataclass(frozen=True)
class Sum:
    left: "Process"
    right: "Process"


Process = Union[Nil, Recv, Send, PVar, PRec, Cond, Sum]


@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    label: str
    payload: ExtendedValue


# -- participants and validation of global types ----------------------------


def participants(g: GlobalType) -> frozenset[str]:
    """Every sender and receiver occurring in ``g``."""
    match g:
        case Comm(p, q, branches):
            out = {p, q}
            for _, _, cont in branches:
                out |= participants(cont)
            return frozenset(out)
        case GRec(_, body):
            return participants(body)
        case _:
            return frozenset()


def validate_global(g: GlobalType) -> list[str]:
    """Return every well-formedness problem in ``g`` (empty list when fine)."""
    errors: list[str] = []

    def walk(node, bound: frozenset[str], unguarded: frozenset[str], path: str) -> None:
        match node:
            case Comm(p, q, branches):
                if p == q:
                    errors.append(f"{path}: self-communication {p} -> {q}")
                if not branches:
                    errors.append(f"{path}: empty branching")
                _check_branches(branches, path, errors)
                for label, _, cont in branches:
                    walk(cont, bound, frozenset(), f"{path}/{label}")
            case GRec(t, body):
                walk(body, bound | {t}, unguarded | {t}, f"{path}/mu {t}")
            case GVar(t):
                if t not in bound:
                    errors.append(f"{path}: unbound variable {t}")
                elif t in unguarded:
                    errors.append(f"{path}: unguarded recursion on {t}")
            case GEnd():
                pass
            case _:
                errors.append(f"{path}: not a global type: {node!r}")

    walk(g, frozenset(), frozenset(), "")
    return errors


def validate_monitor(m: Monitor) -> list[str]:
    errors: list[str] = []

    def walk(node, bound, unguarded, path):
        match node:
            case MIn(_, branches) | MOut(_, branches):
                if not branches:
                    errors.append(f"{path}: empty branching")
                _check_branches(branches, path, errors)
                for label, _, cont in branches:
                    walk(cont, bound, frozenset(), f"{path}/{label}")
            case MRec(t, body):
                walk(body, bound | {t}, unguarded | {t}, f"{path}/mu {t}")
            case MVar(t):
                if t not in bound:
                    errors.append(f"{path}: unbound variable {t}")
                elif t in unguarded:
                    errors.append(f"{path}: unguarded recursion on {t}")
            case MEnd():
                pass
            case _:
                errors.append(f"{path}: not a monitor: {node!r}")

    walk(m, frozenset(), frozenset(), "")
    return errors


def _check_branches(branches, path, errors):
    seen = set()
    for label, sort, _ in branches:
        if label in seen:
            errors.append(f"{path}: duplicate label {label}")
        seen.add(label)
        if sort not in SORTS:
            errors.append(f"{path}: unknown sort {sort}")


def validate_process(p: Process) -> list[str]:
    """Guarded, closed recursion; bound expression variables; one channel;
    resolved sorts on every prefix."""
    errors: list[str] = []
    channels: set = set()

    def expr_vars(e):
        match e:
            case Var(x):
                yield x
            case UnOp(_, a):
                yield from expr_vars(a)
            case BinOp(_, a, b):
                yield from expr_vars(a)
                yield from expr_vars(b)

    def walk(node, pbound, unguarded, vbound, path):
        match node:
            case Nil():
                pass
            case Recv(chan, _, label, var, sort, cont):
                channels.add(chan)
                if sort not in SORTS:
                    errors.append(f"{path}: no sort for input label {label}")
                walk(cont, pbound, frozenset(), vbound | {var}, f"{path}/?{label}")
            case Send(chan, _, label, expr, sort, cont):
                channels.add(chan)
                if sort not in SORTS:
                    errors.append(f"{path}: no sort for output label {label}")
                for x in expr_vars(expr):
                    if x not in vbound:
                        errors.append(f"{path}: unbound variable {x}")
                walk(cont, pbound, frozenset(), vbound, f"{path}/!{label}")
            case PVar(x):
                if x not in pbound:
                    errors.append(f"{path}: unbound process variable {x}")
                elif x in unguarded:
                    errors.append(f"{path}: unguarded recursion on {x}")
            case PRec(x, body):
                walk(body, pbound | {x}, unguarded | {x}, vbound, f"{path}/mu {x}")
            case Cond(test, a, b):
                for x in expr_vars(test):
                    if x not in vbound:
                        errors.append(f"{path}: unbound variable {x}")
                walk(a, pbound, unguarded, vbound, f"{path}/then")
                walk(b, pbound, unguarded, vbound, f"{path}/else")
            case Sum(a, b):
                walk(a, pbound, unguarded, vbound, f"{path}/+l")
                walk(b, pbound, unguarded, vbound, f"{path}/+r")
            case _:
                errors.append(f"{path}: not a process: {node!r}")

    walk(p, frozenset(), frozenset(), frozenset(), "")
    if len(channels) > 1:
        errors.append("process uses more than one channel")
    return errors


# -- substitution and unfolding (replacement terms are always closed) -------


def _sub_branches(branches, f):
    return tuple((label, sort, f(cont)) for label, sort, cont in branches)


def subst_global(g: GlobalType, var: str, rep: GlobalType) -> GlobalType:
    match g:
        case Comm(p, q, branches):
            return Comm(p, q, _sub_branches(branches, lambda c: subst_global(c, var, rep)))
        case GVar(t):
            return rep if t == var else g
        case GRec(t, body):
            return g if t == var else GRec(t, subst_global(body, var, rep))
    return g


def subst_monitor(m: Monitor, var: str, rep: Monitor) -> Monitor:
    match m:
        case MIn(peer, branches):
            return MIn(peer, _sub_branches(branches, lambda c: subst_monitor(c, var, rep)))
        case MOut(peer, branches):
            return MOut(peer, _sub_branches(branches, lambda c: subst_monitor(c, var, rep)))
        case MVar(t):
            return rep if t == var else m
        case MRec(t, body):
            return m if t == var else MRec(t, subst_monitor(body, var, rep))
    return m


def subst_ptype(t: ProcessType, var: str, rep: ProcessType) -> ProcessType:
    match t:
        case TIn(p, l, s, cont):
            return TIn(p, l, s, subst_ptype(cont, var, rep))
        case TOut(p, l, s, cont):
            return TOut(p, l, s, subst_ptype(cont, var, rep))
        case TAnd(ops):
            return TAnd(tuple(subst_ptype(o, var, rep) for o in ops))
        case TOr(ops):
            return TOr(tuple(subst_ptype(o, var, rep) for o in ops))
        case TVar(name):
            return rep if name == var else t
        case TRec(name, body):
            return t if name == var else TRec(name, subst_ptype(body, var, rep))
    return t


def subst_process(p: Process, var: str, rep: Process) -> Process:
    match p:
        case Recv(c, peer, l, x, s, cont):
            return Recv(c, peer, l, x, s, subst_process(cont, var, rep))
        case Send(c, peer, l, e, s, cont):
            return Send(c, peer, l, e, s, subst_process(cont, var, rep))
        case PVar(x):
            return rep if x == var else p
        case PRec(x, body):
            return p if x == var else PRec(x, subst_process(body, var, rep))
        case Cond(e, a, b):
            return Cond(e, subst_process(a, var, rep), subst_process(b, var, rep))
        case Sum(a, b):
            return Sum(subst_process(a, var, rep), subst_process(b, var, rep))
    return p


def unfold_global(g: GlobalType) -> GlobalType:
    while isinstance(g, GRec):
        g = subst_global(g.body, g.var, g)
    return g


def unfold_monitor(m: Monitor) -> Monitor:
    while isinstance(m, MRec):
        m = subst_monitor(m.body, m.var, m)
    return m


def unfold_ptype(t: ProcessType) -> ProcessType:
    while isinstance(t, TRec):
        t = subst_ptype(t.body, t.var, t)
    return t


def unfold_process(p: Process) -> Process:
    while isinstance(p, PRec):
        p = subst_process(p.body, p.var, p)
    return p


# -- values into processes --------------------------------------------------


def subst_expr(e: Expression, x: str, u: ExtendedValue) -> Expression:
    match e:
        case Var(name):
            return as_expr(u) if name == x else e
        case UnOp(op, a):
            return UnOp(op, subst_expr(a, x, u))
        case BinOp(op, a, b):
            return BinOp(op, subst_expr(a, x, u), subst_expr(b, x, u))
    return e


def subst_value(p: Process, x: str, u: ExtendedValue) -> Process:
    """``P{u/x}``; stops below a receive that rebinds ``x``."""
    match p:
        case Recv(c, peer, l, var, s, cont):
            if var == x:
                return p
            return Recv(c, peer, l, var, s, subst_value(cont, x, u))
        case Send(c, peer, l, e, s, cont):
            return Send(c, peer, l, subst_expr(e, x, u), s, subst_value(cont, x, u))
        case PRec(v, body):
            return PRec(v, subst_value(body, x, u))
        case Cond(e, a, b):
            return Cond(subst_expr(e, x, u), subst_value(a, x, u), subst_value(b, x, u))
        case Sum(a, b):
            return Sum(subst_value(a, x, u), subst_value(b, x, u))
    return p


def subst_channel(p: Process, chan: Channel) -> Process:
    """Replace whatever channel ``p`` uses by ``chan`` (``P{s[p]/y}``)."""
    match p:
        case Recv(_, peer, l, x, s, cont):
            return Recv(chan, peer, l, x, s, subst_channel(cont, chan))
        case Send(_, peer, l, e, s, cont):
            return Send(chan, peer, l, e, s, subst_channel(cont, chan))
        case PRec(x, body):
            return PRec(x, subst_channel(body, chan))
        case Cond(e, a, b):
            return Cond(e, subst_channel(a, chan), subst_channel(b, chan))
        case Sum(a, b):
            return Sum(subst_channel(a, chan), subst_channel(b, chan))
    return p


def expr_nonces(e: Expression) -> set[int]:
    match e:
        case NonceRef(i):
            return {i}
        case UnOp(_, a):
            return expr_nonces(a)
        case BinOp(_, a, b):
            return expr_nonces(a) | expr_nonces(b)
    return set()


def process_nonces(p: Process) -> set[int]:
    match p:
        case Recv(_, _, _, _, _, cont):
            return process_nonces(cont)
        case Send(_, _, _, e, _, cont):
            return expr_nonces(e) | process_nonces(cont)
        case PRec(_, body):
            return process_nonces(body)
        case Cond(e, a, b):
            return expr_nonces(e) | process_nonces(a) | process_nonces(b)
        case Sum(a, b):
            return process_nonces(a) | process_nonces(b)
    return set()


def process_channels(p: Process) -> set:
    match p:
        case Recv(c, _, _, _, _, cont) | Send(c, _, _, _, _, cont):
            return {c} | process_channels(cont)
        case PRec(_, body):
            return process_channels(body)
        case Cond(_, a, b) | Sum(a, b):
            return process_channels(a) | process_channels(b)
    return set()


# -- alpha-normal forms -----------------------------------------------------


def alpha_monitor(m: Monitor, prefix: str = "%") -> Monitor:
    """Rename bound recursion variables by binding depth."""

    def go(node, env, depth):
        match node:
            case MIn(peer, branches):
                return MIn(peer, _sub_branches(branches, lambda c: go(c, env, depth)))
            case MOut(peer, branches):
                return MOut(peer, _sub_branches(branches, lambda c: go(c, env, depth)))
            case MVar(t):
                return MVar(env.get(t, t))
            case MRec(t, body):
                new = f"{prefix}{depth}"
                return MRec(new, go(body, {**env, t: new}, depth + 1))
        return node

    return go(m, {}, 0)


def alpha_global(g: GlobalType, prefix: str = "%") -> GlobalType:
    def go(node, env, depth):
        match node:
            case Comm(p, q, branches):
                return Comm(p, q, _sub_branches(branches, lambda c: go(c, env, depth)))
            case GVar(t):
                return GVar(env.get(t, t))
            case GRec(t, body):
                new = f"{prefix}{depth}"
                return GRec(new, go(body, {**env, t: new}, depth + 1))
        return node

    return go(g, {}, 0)


def monitor_free_vars(m: Monitor) -> frozenset[str]:
    match m:
        case MIn(_, branches) | MOut(_, branches):
            out: frozenset[str] = frozenset()
            for _, _, c in branches:
                out |= monitor_free_vars(c)
            return out
        case MVar(t):
            return frozenset({t})
        case MRec(t, body):
            return monitor_free_vars(body) - {t}
    return frozenset()


def monitor_peers(m: Monitor) -> frozenset[str]:
    """Every peer named by a communication action anywhere in ``m``."""
    match m:
        case MIn(peer, branches) | MOut(peer, branches):
            out = {peer}
            for _, _, c in branches:
                out |= monitor_peers(c)
            return frozenset(out)
        case MRec(_, body):
            return monitor_peers(body)
    return frozenset()
