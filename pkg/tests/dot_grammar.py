"""Minimal validator for the DOT subset the renderer emits.

Checks syntactic shape only (comments, one digraph block, node and edge
statements with bracketed attribute lists) and returns node/edge counts
so tests can compare them against graph contents.
"""

from __future__ import annotations

import re

_QUOTED = r'"(?:[^"\\]|\\.)*"'
_ATTR = rf'\s*[A-Za-z_][A-Za-z0-9_]*\s*=\s*(?:{_QUOTED}|[A-Za-z0-9_.]+)\s*'
_ATTR_LIST = rf'\[{_ATTR}(?:,{_ATTR})*\]'

_NODE_RE = re.compile(rf'^({_QUOTED})\s*({_ATTR_LIST})?\s*;$')
_EDGE_RE = re.compile(rf'^({_QUOTED})\s*->\s*({_QUOTED})\s*({_ATTR_LIST})?\s*;$')
_PLAIN_RE = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*\s*=\s*[A-Za-z0-9_.]+\s*;$')


class DotSyntaxError(AssertionError):
    pass


def validate_dot(text: str) -> tuple[int, int]:
    """Raise on malformed input; return (node_count, edge_count)."""
    lines = text.splitlines()
    i = 0
    while i < len(lines) and (not lines[i].strip()
                              or lines[i].lstrip().startswith("//")):
        i += 1
    if i >= len(lines):
        raise DotSyntaxError("no digraph block")
    header = lines[i].strip()
    m = re.match(r'^digraph\s+[A-Za-z_][A-Za-z0-9_]*\s*\{$', header)
    if m is None:
        raise DotSyntaxError(f"bad digraph header: {header!r}")
    nodes = edges = 0
    closed = False
    for raw in lines[i + 1:]:
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        if line == "}":
            closed = True
            continue
        if closed:
            raise DotSyntaxError(f"content after closing brace: {line!r}")
        if _EDGE_RE.match(line):
            edges += 1
        elif _NODE_RE.match(line):
            nodes += 1
        elif _PLAIN_RE.match(line):
            continue  # layout directives like rankdir=LR;
        else:
            raise DotSyntaxError(f"unrecognized statement: {line!r}")
    if not closed:
        raise DotSyntaxError("digraph block never closed")
    return nodes, edges
