"""Deterministic concrete syntax for every term kind.

The output is accepted by :mod:`secadapt.parser`, and parsing it back yields
the same term. Parentheses are inserted only where the grammar needs them.
"""

from __future__ import annotations

from .syntax import (
    BinOp,
    Comm,
    Cond,
    GEnd,
    GRec,
    GVar,
    Lit,
    MEnd,
    Message,
    MIn,
    MOut,
    MRec,
    MVar,
    Nil,
    Nonce,
    NonceRef,
    PRec,
    PVar,
    Recv,
    SecurityGlobalType,
    Send,
    SessionChannel,
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
)


def render_value(u) -> str:
    if isinstance(u, Nonce):
        return f"#{u.index}"
    payload = ("true" if u.payload else "false") if type(u.payload) is bool else str(u.payload)
    return f"{payload}@{u.level}"


_PREC = {"or": 1, "and": 2, "<": 4, "=": 4, "+": 5, "-": 5}


def render_expr(e, level: int = 0) -> str:
    match e:
        case Lit(v):
            return render_value(v)
        case NonceRef(i):
            return f"#{i}"
        case Var(x):
            return x
        case UnOp(op, arg):
            text = f"{op} {render_expr(arg, 3)}"
            return f"({text})" if level > 3 else text
        case BinOp(op, left, right):
            p = _PREC[op]
            if p == 4:
                text = f"{render_expr(left, 5)} {op} {render_expr(right, 5)}"
            else:
                text = f"{render_expr(left, p)} {op} {render_expr(right, p + 1)}"
            return f"({text})" if level > p else text
    raise TypeError(f"not an expression: {e!r}")


def render_channel(c) -> str:
    if isinstance(c, SessionChannel):
        return f"{c.session}[{c.participant}]"
    return c.name


def _branches(branches, render_cont) -> str:
    return ", ".join(f"{label}({sort}).{render_cont(cont)}" for label, sort, cont in branches)


def render_global(g) -> str:
    match g:
        case Comm(p, q, branches):
            inner = ", ".join(f"{l}({s}). {render_global(c)}" for l, s, c in branches)
            return f"{p} -> {q} : {{ {inner} }}"
        case GVar(t):
            return t
        case GRec(t, body):
            return f"mu {t}. {render_global(body)}"
        case GEnd():
            return "end"
    raise TypeError(f"not a global type: {g!r}")


def render_monitor(m) -> str:
    match m:
        case MIn(peer, branches):
            return f"{peer}?{{{_branches(branches, render_monitor)}}}"
        case MOut(peer, branches):
            return f"{peer}!{{{_branches(branches, render_monitor)}}}"
        case MVar(t):
            return t
        case MRec(t, body):
            return f"mu {t}. {render_monitor(body)}"
        case MEnd():
            return "end"
    raise TypeError(f"not a monitor: {m!r}")


def render_type(t) -> str:
    match t:
        case TIn(p, label, sort, cont):
            return f"?{p}:{label}({sort}).{_type_cont(cont)}"
        case TOut(q, label, sort, cont):
            return f"!{q}:{label}({sort}).{_type_cont(cont)}"
        case TAnd(ops):
            parts = []
            for o in ops:
                s = render_type(o)
                parts.append(f"({s})" if isinstance(o, (TOr, TRec, TAnd)) else s)
            return " & ".join(parts)
        case TOr(ops):
            parts = []
            for o in ops:
                s = render_type(o)
                parts.append(f"({s})" if isinstance(o, (TRec, TOr)) else s)
            return " | ".join(parts)
        case TVar(name):
            return name
        case TRec(var, body):
            return f"mu {var}. {render_type(body)}"
        case TEnd():
            return "end"
    raise TypeError(f"not a process type: {t!r}")


def _type_cont(t) -> str:
    s = render_type(t)
    return f"({s})" if isinstance(t, (TAnd, TOr, TRec)) else s


def _ends_open(p) -> bool:
    match p:
        case Recv(cont=cont) | Send(cont=cont):
            return _ends_open(cont)
        case PRec():
            return True
        case Cond(else_=b):
            return _ends_open(b)
        case Sum(right=r):
            return _ends_open(r)
    return False


def render_process(p) -> str:
    match p:
        case Nil():
            return "0"
        case Recv(chan, peer, label, var, sort, cont):
            ann = f":{sort}" if sort else ""
            return f"{render_channel(chan)}?{peer}:{label}({var}{ann}).{_proc_cont(cont)}"
        case Send(chan, peer, label, expr, sort, cont):
            ann = f":{sort}" if sort else ""
            return f"{render_channel(chan)}!{peer}:{label}({render_expr(expr)}{ann}).{_proc_cont(cont)}"
        case PVar(x):
            return x
        case PRec(x, body):
            return f"mu {x}. {render_process(body)}"
        case Cond(test, a, b):
            then = render_process(a)
            if isinstance(a, Sum) or _ends_open(a):
                then = f"({then})"
            other = render_process(b)
            if isinstance(b, Sum):
                other = f"({other})"
            return f"if {render_expr(test)} then {then} else {other}"
        case Sum(a, b):
            left = render_process(a)
            if _ends_open(a):
                left = f"({left})"
            right = render_process(b)
            if isinstance(b, Sum):
                right = f"({right})"
            return f"{left} + {right}"
    raise TypeError(f"not a process: {p!r}")


def _proc_cont(p) -> str:
    s = render_process(p)
    return f"({s})" if isinstance(p, Sum) else s


def render_message(m: Message) -> str:
    return f"{m.sender}>{m.receiver}:{m.label}({render_value(m.payload)})"


def render_levels(levels) -> str:
    return "{ " + ", ".join(f"{p}: {lv}" for p, lv in levels) + " }"


def render_sgt(sg: SecurityGlobalType) -> str:
    return f"new({render_global(sg.g)}, {render_levels(sg.levels)})"


def render(term) -> str:
    """Render any syntax node."""
    if isinstance(term, (Comm, GVar, GRec, GEnd)):
        return render_global(term)
    if isinstance(term, (MIn, MOut, MVar, MRec, MEnd)):
        return render_monitor(term)
    if isinstance(term, (TIn, TOut, TAnd, TOr, TVar, TRec, TEnd)):
        return render_type(term)
    if isinstance(term, (Nil, Recv, Send, PVar, PRec, Cond, Sum)):
        return render_process(term)
    if isinstance(term, (Lit, NonceRef, Var, UnOp, BinOp)):
        return render_expr(term)
    if isinstance(term, (Value, Nonce)):
        return render_value(term)
    if isinstance(term, (UserChannel, SessionChannel)):
        return render_channel(term)
    if isinstance(term, Message):
        return render_message(term)
    if isinstance(term, SecurityGlobalType):
        return render_sgt(term)
    raise TypeError(f"cannot render {term!r}")
