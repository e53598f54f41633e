"""Reading and writing vertex lists with exact rational coordinates."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from ..euclid import DomainError
from .core import Polytope, build
from .exact import fmt, to_fraction


def parse_vertices(text: str) -> list[tuple[Fraction, ...]]:
    """JSON (a list of coordinate lists) or whitespace-separated rows.

    Coordinates may be integers, decimal strings or ``"p/q"`` strings; lines
    starting with ``#`` are ignored in the plain-text form.
    """
    text = text.strip()
    if not text:
        raise DomainError("empty vertex file")
    if text[0] in "[{":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data.get("vertices")
        rows = [[str(c) if isinstance(c, (int, str)) else repr(c) for c in row] for row in data]
    else:
        rows = [line.replace(",", " ").split() for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
    pts = [tuple(to_fraction(c) for c in row) for row in rows]
    if len({len(p) for p in pts}) != 1:
        raise DomainError("vertices have inconsistent dimensions")
    return pts


def load_polytope(path: str | Path) -> Polytope:
    return build(parse_vertices(Path(path).read_text()))


def dump_vertices(P: Polytope) -> str:
    if P.vertices is None:
        rows = [[repr(float(c)) for c in v] for v in P.vertex_array]
    else:
        rows = [[fmt(c) for c in v] for v in P.vertices]
    return json.dumps({"vertices": rows})


def save_polytope(P: Polytope, path: str | Path) -> None:
    Path(path).write_text(dump_vertices(P) + "\n")


__all__ = ["parse_vertices", "load_polytope", "dump_vertices", "save_polytope"]
