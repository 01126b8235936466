"""Text form of rule-application traces, one δ per line.

    step=3 rule=sift kept=[0] removed=[2] added=[] heads=[prime(2),prime(4)]

Parallel runs append ``worker=`` and ``seq=``.  Lines starting with ``#``
and blank lines are ignored when reading.
"""

from __future__ import annotations

from typing import Iterable

from .engine_seq import Delta
from .errors import ParseError
from .parser import parse_goal
from .syntax import Program


def format_trace(trace: Iterable[Delta]) -> str:
    return "".join(d.format(k + 1) + "\n" for k, d in enumerate(trace))


def _fields(line: str, lineno: int) -> dict[str, str]:
    """Split ``key=value`` pairs on blanks outside brackets and quotes."""
    out = {}
    depth, quote, start = 0, None, 0
    parts = []
    for k, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == " " and depth == 0:
            parts.append(line[start:k])
            start = k + 1
    parts.append(line[start:])
    for part in filter(None, parts):
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got {part!r}", lineno, 1)
        out[key] = value
    return out


def _ids(text: str, lineno: int) -> tuple[int, ...]:
    if not (text.startswith("[") and text.endswith("]")):
        raise ParseError(f"expected an id list, got {text!r}", lineno, 1)
    inner = text[1:-1].strip()
    return tuple(int(x) for x in inner.split(",")) if inner else ()


def _constraints(text: str, program: Program | None, lineno: int):
    if not (text.startswith("[") and text.endswith("]")):
        raise ParseError(f"expected a constraint list, got {text!r}", lineno, 1)
    inner = text[1:-1].strip()
    return tuple(parse_goal(inner, program)) if inner else ()


def parse_trace(text: str, program: Program | None = None) -> list[Delta]:
    trace = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        f = _fields(line, lineno)
        try:
            kept, removed = _ids(f["kept"], lineno), _ids(f["removed"], lineno)
            heads = _constraints(f["heads"], program, lineno)
            added = _constraints(f["added"], program, lineno)
            rule = f["rule"]
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]}", lineno, 1) from None
        if len(heads) != len(kept) + len(removed):
            raise ParseError("heads= does not match kept= and removed=", lineno, 1)
        d = Delta(rule, kept, removed, heads[:len(kept)], heads[len(kept):], {}, added)
        if "worker" in f:
            d.worker = int(f["worker"])
        if "seq" in f:
            d.seq = int(f["seq"])
        trace.append(d)
    return trace
