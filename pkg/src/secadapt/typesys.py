"""Process types: validity, synthesis from processes, subtyping, adequacy.

Intersections and unions are kept n-ary and normalized (flattened, operands
deduplicated and sorted by rendering), which realizes the quotient by
idempotence, commutativity and associativity. Bound type variables are
renamed ``t0, t1, ...`` by binding depth, so normalized terms of
alpha-equivalent types are identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, reduce
from itertools import count, product

from .render import render_type
from .syntax import (
    BinOp,
    Cond,
    Lit,
    MEnd,
    MIn,
    MOut,
    MRec,
    MVar,
    Nil,
    NonceRef,
    PRec,
    PVar,
    Recv,
    Send,
    Sum,
    TAnd,
    TEnd,
    TIn,
    TOr,
    TOut,
    TRec,
    TVar,
    UnOp,
    UserChannel,
    Value,
    Var,
    unfold_ptype,
)


class InvalidType(ValueError):
    def __init__(self, node, bullet: str):
        self.node = node
        self.bullet = bullet
        super().__init__(f"{render_type(node)}: {bullet}")


class IllTyped(ValueError):
    def __init__(self, node, reason: str):
        self.node = node
        self.reason = reason
        super().__init__(reason)


# -- lin / lout -------------------------------------------------------------


def lin(t) -> frozenset[str]:
    match t:
        case TIn(label=label):
            return frozenset({label})
        case TAnd(ops) | TOr(ops):
            return frozenset().union(*(lin(o) for o in ops))
        case TRec(body=body):
            return lin(body)
    return frozenset()


def lout(t) -> frozenset[str]:
    match t:
        case TOut(label=label):
            return frozenset({label})
        case TAnd(ops) | TOr(ops):
            return frozenset().union(*(lout(o) for o in ops))
        case TRec(body=body):
            return lout(body)
    return frozenset()


# -- normalization ----------------------------------------------------------


def _free(t) -> frozenset[str]:
    match t:
        case TIn(cont=c) | TOut(cont=c):
            return _free(c)
        case TAnd(ops) | TOr(ops):
            return frozenset().union(*(_free(o) for o in ops))
        case TVar(name):
            return frozenset({name})
        case TRec(var, body):
            return _free(body) - {var}
    return frozenset()


@lru_cache(maxsize=65536)
def normalize(t):
    """Canonical representative of ``t`` modulo ACI of ``&``/``|`` and alpha."""
    return _norm(t, {}, 0)


def _norm(t, env, depth):
    match t:
        case TIn(p, label, sort, cont):
            return TIn(p, label, sort, _norm(cont, env, depth))
        case TOut(q, label, sort, cont):
            return TOut(q, label, sort, _norm(cont, env, depth))
        case TAnd(ops) | TOr(ops):
            cls = type(t)
            flat = []
            for o in ops:
                n = _norm(o, env, depth)
                if isinstance(n, cls):
                    flat.extend(n.operands)
                else:
                    flat.append(n)
            uniq = sorted(set(flat), key=render_type)
            return uniq[0] if len(uniq) == 1 else cls(tuple(uniq))
        case TVar(name):
            return TVar(env.get(name, name))
        case TRec(var, body):
            new = f"t{depth}"
            nb = _norm(body, {**env, var: new}, depth + 1)
            if new not in _free(nb):
                return nb
            return TRec(new, nb)
        case TEnd():
            return t
    raise TypeError(f"not a process type: {t!r}")


def type_errors(t) -> list[InvalidType]:
    errors: list[InvalidType] = []

    def walk(node):
        match node:
            case TIn(cont=c) | TOut(cont=c):
                walk(c)
            case TAnd(ops):
                for i, a in enumerate(ops):
                    for b in ops[i + 1:]:
                        if lin(a) & lin(b):
                            errors.append(InvalidType(node, "intersection operands share an input label"))
                        if lout(a) & lout(b):
                            errors.append(InvalidType(node, "intersection operands share an output label"))
                for o in ops:
                    walk(o)
            case TOr(ops):
                for o in ops:
                    if lin(o):
                        errors.append(InvalidType(node, "union operand has input labels"))
                for i, a in enumerate(ops):
                    for b in ops[i + 1:]:
                        if lout(a) & lout(b):
                            errors.append(InvalidType(node, "union operands share an output label"))
                for o in ops:
                    walk(o)
            case TRec(body=body):
                walk(body)

    walk(normalize(t))
    return errors


def validate_type(t) -> None:
    """Raise :class:`InvalidType` unless ``t`` is a process type."""
    errors = type_errors(t)
    if errors:
        raise errors[0]


def is_type(t) -> bool:
    return not type_errors(t)


# -- type synthesis ---------------------------------------------------------

ANY = "any"  # the sort of a nonce


@dataclass(frozen=True)
class TypingEnv:
    vars: dict = field(default_factory=dict)
    procvars: dict = field(default_factory=dict)

    def with_var(self, x: str, sort: str) -> "TypingEnv":
        # a rebinding shadows, i.e. the binder is read as alpha-renamed apart
        return TypingEnv({**self.vars, x: sort}, self.procvars)

    def with_procvar(self, x: str, t) -> "TypingEnv":
        return TypingEnv(self.vars, {**self.procvars, x: t})


def _fits(sort: str, want: str) -> bool:
    return sort == want or sort == ANY or want == ANY


def expr_sort(e, env: TypingEnv) -> str:
    match e:
        case Lit(v):
            return v.sort
        case NonceRef():
            return ANY
        case Var(x):
            if x not in env.vars:
                raise IllTyped(e, f"unbound variable {x}")
            return env.vars[x]
        case UnOp("not", a):
            if not _fits(expr_sort(a, env), "bool"):
                raise IllTyped(e, "'not' expects bool")
            return "bool"
        case BinOp(op, a, b):
            sa, sb = expr_sort(a, env), expr_sort(b, env)
            if op in ("+", "-", "<"):
                if not (_fits(sa, "nat") and _fits(sb, "nat")):
                    raise IllTyped(e, f"'{op}' expects nat operands")
                return "nat" if op != "<" else "bool"
            if op in ("and", "or"):
                if not (_fits(sa, "bool") and _fits(sb, "bool")):
                    raise IllTyped(e, f"'{op}' expects bool operands")
                return "bool"
            if op == "=":
                if not _fits(sa, sb):
                    raise IllTyped(e, "'=' compares values of different sorts")
                return "bool"
    raise IllTyped(e, f"unknown expression {e!r}")


def synthesize(env: TypingEnv | None, p, c=None):
    """The type of process ``p`` using channel ``c`` under ``env``.

    With ``c`` omitted, the first channel met is taken as the process's own.
    Raises :class:`IllTyped` on sort errors, unbound names, a foreign channel
    or an intersection/union that is not a type.
    """
    chan = [c]
    t = _synth(env or TypingEnv(), p, chan)
    return normalize(t)


def _synth(env, p, chan):
    match p:
        case Nil():
            return TEnd()
        case Recv(c, peer, label, x, sort, cont):
            _own(p, c, chan)
            if sort is None:
                raise IllTyped(p, f"no sort for input label {label}")
            return TIn(peer, label, sort, _synth(env.with_var(x, sort), cont, chan))
        case Send(c, peer, label, e, sort, cont):
            _own(p, c, chan)
            if sort is None:
                raise IllTyped(p, f"no sort for output label {label}")
            if not _fits(expr_sort(e, env), sort):
                raise IllTyped(p, f"payload of {label} is not of sort {sort}")
            return TOut(peer, label, sort, _synth(env, cont, chan))
        case PVar(x):
            if x not in env.procvars:
                raise IllTyped(p, f"unbound process variable {x}")
            return env.procvars[x]
        case PRec(x, body):
            tb = _synth(env.with_procvar(x, TVar(x)), body, chan)
            return TRec(x, tb)
        case Cond(test, a, b):
            if not _fits(expr_sort(test, env), "bool"):
                raise IllTyped(p, "condition is not boolean")
            t = TOr((_synth(env, a, chan), _synth(env, b, chan)))
            _require_type(p, t, "union of the branches is not a type")
            return t
        case Sum(a, b):
            t = TAnd((_synth(env, a, chan), _synth(env, b, chan)))
            _require_type(p, t, "intersection of the summands is not a type")
            return t
    raise IllTyped(p, f"not a process: {p!r}")


def _own(p, c, chan):
    if chan[0] is None:
        chan[0] = c
    elif c != chan[0]:
        raise IllTyped(p, "process uses a channel other than its own")


def _require_type(p, t, reason):
    errors = type_errors(t)
    if errors:
        raise IllTyped(p, f"{reason} ({errors[0].bullet})")


# -- subtyping --------------------------------------------------------------


def _dnf(t) -> list[frozenset]:
    t = unfold_ptype(t)
    match t:
        case TOr(ops):
            return [clause for o in ops for clause in _dnf(o)]
        case TAnd(ops):
            parts = [_dnf(o) for o in ops]
            return [frozenset().union(*combo) for combo in product(*parts)]
    return [frozenset({t})]


def _cnf(t) -> list[frozenset]:
    t = unfold_ptype(t)
    match t:
        case TAnd(ops):
            return [clause for o in ops for clause in _cnf(o)]
        case TOr(ops):
            parts = [_cnf(o) for o in ops]
            return [frozenset().union(*combo) for combo in product(*parts)]
    return [frozenset({t})]


class _Prover:
    """Decides ``a <= b`` for closed types.

    The left side is put in disjunctive and the right side in conjunctive
    normal form (the two distributivity laws); a conjunction of atoms is below
    a disjunction of atoms iff one atom is below another. Atoms are prefixes,
    ``end`` and free variables. Prefix pairs compare their continuations
    coinductively: a pair already under examination is assumed to hold.
    """

    def __init__(self):
        self.assumed: set = set()

    def leq(self, a, b) -> bool:
        right = _cnf(b)
        for clause in _dnf(a):
            for disj in right:
                if not any(self.atom_leq(x, y) for x in clause for y in disj):
                    return False
        return True

    def atom_leq(self, x, y) -> bool:
        if isinstance(y, TEnd):
            return True
        if isinstance(x, (TEnd, TVar)) or isinstance(y, TVar):
            return x == y
        if type(x) is not type(y) or (x.peer, x.label, x.sort) != (y.peer, y.label, y.sort):
            return False
        pair = (x.cont, y.cont)
        if pair in self.assumed:
            return True
        saved = set(self.assumed)
        self.assumed.add(pair)
        if self.leq(x.cont, y.cont):
            return True
        self.assumed = saved
        return False


@lru_cache(maxsize=262144)
def _subtype_normal(a, b) -> bool:
    return _Prover().leq(a, b)


def subtype(t1, t2) -> bool:
    return _subtype_normal(normalize(t1), normalize(t2))


# -- monitors as types, adequacy, canonical processes -----------------------


@lru_cache(maxsize=65536)
def monitor_type(m):
    return normalize(_mtype(m))


def _mtype(m):
    match m:
        case MIn(peer, branches):
            return TAnd(tuple(TIn(peer, l, s, _mtype(c)) for l, s, c in branches))
        case MOut(peer, branches):
            return TOr(tuple(TOut(peer, l, s, _mtype(c)) for l, s, c in branches))
        case MVar(t):
            return TVar(t)
        case MRec(t, body):
            return TRec(t, _mtype(body))
        case MEnd():
            return TEnd()
    raise TypeError(f"not a monitor: {m!r}")


def adequate(t, m) -> bool:
    return subtype(t, monitor_type(m))


def default_value(sort: str, bottom: str) -> Value:
    return Value(False if sort == "bool" else 0, bottom)


USER_CHANNEL = UserChannel("y")


def canonical_process(m, bottom: str, chan=USER_CHANNEL):
    """A process built from monitor ``m`` together with its type.

    Inputs become an external choice over every branch; outputs send the
    first branch's label with a bottom-level default payload.
    """
    xs, procvars = count(), count()

    def go(node, env):
        match node:
            case MIn(peer, branches):
                recvs = [Recv(chan, peer, l, f"x{next(xs)}", s, go(c, env)) for l, s, c in branches]
                return reduce(Sum, recvs)
            case MOut(peer, branches):
                l, s, c = branches[0]
                return Send(chan, peer, l, Lit(default_value(s, bottom)), s, go(c, env))
            case MRec(t, body):
                x = f"X{next(procvars)}"
                return PRec(x, go(body, {**env, t: x}))
            case MVar(t):
                return PVar(env[t])
            case MEnd():
                return Nil()
        raise TypeError(f"not a monitor: {node!r}")

    proc = go(m, {})
    return proc, synthesize(TypingEnv(), proc, chan)
