"""Graphviz DOT rendering of provenance graphs.

Node shape encodes the super-class (Entity=box, Activity=ellipse,
Agent=house, Extensible=note); relation triples become labeled edges;
membership and literal-valued properties are folded into the node label
so large graphs stay legible.  Output is byte-deterministic for a given
graph and render spec.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    Guid,
    Predicate,
    ProvioError,
    SubClass,
    SuperClass,
    Triple,
)
from .store import ProvGraph, _object_sort_key

HIGHLIGHT_COLOR = "blue"

DEFAULT_STYLE = {
    SuperClass.ENTITY: "box",
    SuperClass.ACTIVITY: "ellipse",
    SuperClass.AGENT: "house",
    SuperClass.EXTENSIBLE: "note",
}


class RenderError(ProvioError):
    """Highlight references an element missing from the graph."""


@dataclass
class RenderSpec:
    highlight_nodes: set[Guid] = field(default_factory=set)
    highlight_edges: set[tuple[Guid, Predicate, Guid]] = field(default_factory=set)
    collapse: bool = False
    style: dict[SuperClass, str] = field(default_factory=lambda: dict(DEFAULT_STYLE))


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') \
        .replace("\n", "\\n") + '"'


def _is_edge_triple(t: Triple) -> bool:
    return (not t.predicate.is_property()
            and t.predicate is not Predicate.WAS_MEMBER_OF)


def _node_label(g: ProvGraph, guid: Guid) -> str:
    node = g.nodes[guid]
    lines = [node.label, f"subClass={node.sub_class.value}"]
    for t in sorted((t for t in g.scan(s=guid)
                     if t.predicate.is_property()
                     and t.predicate is not Predicate.SUB_CLASS),
                    key=lambda t: (t.predicate.value,
                                   _object_sort_key(t.object))):
        lines.append(f"{t.predicate.local_name}={t.object}")
    return "\\n".join(lines)


def to_dot(g: ProvGraph, spec: RenderSpec | None = None) -> str:
    """Render the graph as a DOT digraph.

    With ``collapse`` on, activity nodes of one sub-class are folded
    into a single counted super-node and their edges re-targeted.
    """
    spec = spec or RenderSpec()
    for guid in spec.highlight_nodes:
        if guid not in g.nodes:
            raise RenderError(f"highlight references unknown node {guid!s}")
    for s, p, o in spec.highlight_edges:
        if Triple(s, p, o) not in g.triples:
            raise RenderError(f"highlight references unknown edge "
                              f"({s!s}, {p.prefixed}, {o!s})")

    alias: dict[Guid, str] = {}
    collapsed_counts: dict[SubClass, int] = {}
    if spec.collapse:
        for guid, node in g.nodes.items():
            if node.super_class is SuperClass.ACTIVITY:
                alias[guid] = f"activity:{node.sub_class.value}"
                collapsed_counts[node.sub_class] = \
                    collapsed_counts.get(node.sub_class, 0) + 1

    lines = [
        "// provenance graph rendering",
        "// shapes: Entity=box Activity=ellipse Agent=house Extensible=note"
        f"; highlight={HIGHLIGHT_COLOR}",
        "digraph prov {",
        "    rankdir=LR;",
    ]

    emitted: set[str] = set()
    for guid in sorted(g.nodes, key=str):
        node = g.nodes[guid]
        name = alias.get(guid, str(guid))
        if name in emitted:
            continue
        emitted.add(name)
        if guid in alias:
            label = f"{node.sub_class.value} (x{collapsed_counts[node.sub_class]})"
        else:
            label = _node_label(g, guid)
        attrs = [f"label={_quote(label)}",
                 f"shape={spec.style[node.super_class]}"]
        if guid in spec.highlight_nodes:
            attrs.append(f"color={HIGHLIGHT_COLOR}")
            attrs.append(f"fontcolor={HIGHLIGHT_COLOR}")
        lines.append(f"    {_quote(name)} [{', '.join(attrs)}];")

    edge_lines = []
    for t in sorted((t for t in g.triples if _is_edge_triple(t)),
                    key=lambda t: (str(t.subject), t.predicate.value,
                                   str(t.object))):
        src = alias.get(t.subject, str(t.subject))
        dst = alias.get(Guid(t.object), str(t.object))
        attrs = [f"label={_quote(t.predicate.local_name)}"]
        if (t.subject, t.predicate, t.object) in spec.highlight_edges:
            attrs.append(f"color={HIGHLIGHT_COLOR}")
            attrs.append(f"fontcolor={HIGHLIGHT_COLOR}")
        edge_lines.append(f"    {_quote(src)} -> {_quote(dst)} "
                          f"[{', '.join(attrs)}];")
    if spec.collapse:
        edge_lines = sorted(set(edge_lines))
    lines.extend(edge_lines)
    lines.append("}")
    return "\n".join(lines) + "\n"
