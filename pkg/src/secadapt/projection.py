"""Projection of global types onto participants, yielding monitors."""

from __future__ import annotations

from .syntax import (
    Comm,
    GEnd,
    GRec,
    GVar,
    MEnd,
    MIn,
    MOut,
    MRec,
    MVar,
    SecurityGlobalType,
    alpha_monitor,
    monitor_free_vars,
    participants,
)


class UndefinedProjection(ValueError):
    def __init__(self, participant: str, path: str, detail: str = ""):
        self.participant = participant
        self.path = path or "/"
        msg = f"projection onto {participant} undefined at {self.path}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


def project(g, p: str):
    """``g`` restricted to the actions of ``p``.

    Branches of a communication that ``p`` takes no part in must project to
    alpha-equal monitors; otherwise :class:`UndefinedProjection` is raised.
    """
    return _project(g, p, "")


def _project(g, p, path):
    match g:
        case Comm(sender, receiver, branches):
            projected = [
                (label, sort, _project(cont, p, f"{path}/{label}")) for label, sort, cont in branches
            ]
            if p == sender:
                return MOut(receiver, tuple(projected))
            if p == receiver:
                return MIn(sender, tuple(projected))
            first = projected[0][2]
            key = alpha_monitor(first)
            for label, _, m in projected[1:]:
                if alpha_monitor(m) != key:
                    raise UndefinedProjection(p, path, f"branch {label} differs from {projected[0][0]}")
            return first
        case GRec(t, body):
            inner = _project(body, p, f"{path}/mu {t}")
            if inner == MVar(t):
                return MEnd()
            if t not in monitor_free_vars(inner):
                return inner
            return MRec(t, inner)
        case GVar(t):
            return MVar(t)
        case GEnd():
            return MEnd()
    raise TypeError(f"not a global type: {g!r}")


def project_all(g) -> dict[str, object]:
    return {p: project(g, p) for p in sorted(participants(g))}


def well_formed(sg: SecurityGlobalType) -> str | None:
    """``None`` when every projection is defined and the level map covers
    exactly the participants; otherwise a description of the first failure."""
    parts = participants(sg.g)
    lmap = sg.level_map
    if set(lmap) != set(parts):
        missing = sorted(set(parts) - set(lmap))
        return f"incomplete L: missing {missing}, extra {sorted(set(lmap) - set(parts))}"
    for p in sorted(parts):
        try:
            project(sg.g, p)
        except UndefinedProjection as exc:
            return str(exc)
    return None
