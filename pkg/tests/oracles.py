"""Independent oracles and generators used across the test suite.

Everything here deliberately avoids the library's indexed/query code
paths: the brute-force evaluator enumerates raw assignments over graph
terms, and the random graph generator drives only the public mutation
API.
"""

from __future__ import annotations

import itertools
import random

from provio.model import (
    RELATION_DOMAIN_RANGE,
    Guid,
    Predicate,
    ProvNode,
    SubClass,
    SuperClass,
    Triple,
    make_node,
    mint_guid,
    super_of,
)
from provio.query import Filter, Query, TriplePattern, Var
from provio.store import ProvGraph


def brute_force_evaluate(g: ProvGraph, q: Query) -> set[tuple]:
    """All-assignments conjunctive semantics: try every mapping of the
    query variables to terms occurring anywhere in the graph, keep the
    assignments under which every pattern is a graph triple and every
    filter holds, and project onto the selected variables."""
    terms: set = set()
    for t in g.triples:
        terms.add(t.subject)
        terms.add(t.object)
    variables = sorted({v for p in q.where for v in p.vars()},
                       key=lambda v: v.name)
    term_list = sorted(terms, key=_term_order)
    index = {(t.subject, t.predicate, t.object) for t in g.triples}
    out: set[tuple] = set()
    for assignment in itertools.product(term_list, repeat=len(variables)):
        binding = dict(zip(variables, assignment))
        ok = True
        for p in q.where:
            s = binding[p.subject] if isinstance(p.subject, Var) else p.subject
            o = binding[p.object] if isinstance(p.object, Var) else p.object
            if not isinstance(s, Guid) or (s, p.predicate, o) not in index:
                ok = False
                break
        if not ok:
            continue
        for f in q.filters:
            value = binding[f.var]
            if isinstance(value, Guid) or not isinstance(value, (int, float)):
                ok = False
                break
            if not f.accepts(value):
                ok = False
                break
        if ok:
            select = q.select or tuple(variables)
            out.add(tuple(binding[v] for v in select))
    return out


def _term_order(value):
    if isinstance(value, Guid):
        return (0, str(value), 0.0)
    if isinstance(value, str):
        return (1, value, 0.0)
    return (2, "", float(value))


# ------------------------------------------------------- random graphs

_ENTITY_SUBS = [s for s in SubClass if super_of(s) is SuperClass.ENTITY]
_ACTIVITY_SUBS = [s for s in SubClass if super_of(s) is SuperClass.ACTIVITY]
_AGENT_SUBS = [s for s in SubClass if super_of(s) is SuperClass.AGENT]
_EXT_SUBS = [s for s in SubClass if super_of(s) is SuperClass.EXTENSIBLE]

_LABEL_GARNISH = " _-.%<>\"\\\nüλ€#:?'"


def _label(rng: random.Random, stem: str, i: int) -> str:
    garnish = "".join(rng.choice(_LABEL_GARNISH)
                      for _ in range(rng.randint(0, 3)))
    return f"{stem}{i}{garnish}"


def random_graph(rng: random.Random, n_nodes: int = 24,
                 n_triples: int = 60, tag: str = "") -> ProvGraph:
    """Random valid graph built through the public mutation API only.
    ``tag`` keeps label spaces of independently generated graphs
    disjoint (shared nodes are then added deliberately by tests)."""
    g = ProvGraph()
    by_super: dict[SuperClass, list[ProvNode]] = {s: [] for s in SuperClass}
    for i in range(n_nodes):
        kind = rng.randrange(4)
        if kind == 0:
            node = make_node(rng.choice(_ENTITY_SUBS),
                             "/" + _label(rng, f"{tag}obj", i))
        elif kind == 1:
            sub = rng.choice(_ACTIVITY_SUBS)
            label = _label(rng, f"{tag}api", i)
            node = ProvNode(
                mint_guid(sub, label, rank=rng.randrange(4), seq=i + 1),
                sub, label)
        elif kind == 2:
            node = make_node(rng.choice(_AGENT_SUBS),
                             _label(rng, f"{tag}agent", i))
        else:
            node = make_node(rng.choice(_EXT_SUBS), _label(rng, f"{tag}ext", i))
        g.add_node(node)
        by_super[node.super_class].append(node)

    relations = list(RELATION_DOMAIN_RANGE)
    properties = [Predicate.ELAPSED, Predicate.HAS_ACCURACY,
                  Predicate.VERSION, Predicate.HAS_VALUE]
    added = 0
    attempts = 0
    while added < n_triples and attempts < n_triples * 20:
        attempts += 1
        if rng.random() < 0.7:
            pred = rng.choice(relations)
            domain, rng_set = RELATION_DOMAIN_RANGE[pred]
            subs = [n for s in domain for n in by_super[s]]
            objs = [n for s in rng_set for n in by_super[s]]
            if not subs or not objs:
                continue
            t = Triple(rng.choice(subs).guid, pred, rng.choice(objs).guid)
        else:
            pred = rng.choice(properties)
            pool = [n for nodes in by_super.values() for n in nodes]
            value = rng.choice([
                rng.randint(-5, 1_000_000),
                round(rng.uniform(0, 10), 6),
                rng.uniform(0, 1) * 10 ** rng.randint(-8, 8),
                _label(rng, "lit", added),
            ])
            t = Triple(rng.choice(pool).guid, pred, value)
        before = len(g)
        g.add_triple(t)
        if len(g) > before:
            added += 1
    return g


def random_query(rng: random.Random, g: ProvGraph, max_patterns: int = 6,
                 max_vars: int = 3) -> Query:
    """Random conjunctive query over the graph's own terms: some
    patterns are seeded from actual triples so results are non-trivial."""
    n_vars = rng.randint(1, max_vars)
    variables = [Var(f"v{i}") for i in range(n_vars)]
    triples = sorted(g.triples, key=lambda t: (str(t.subject),
                                               t.predicate.value,
                                               _term_order(t.object)))
    patterns = []
    n_patterns = rng.randint(1, max_patterns)
    for _ in range(n_patterns):
        t = rng.choice(triples)
        subject = rng.choice(variables) if rng.random() < 0.6 else t.subject
        if rng.random() < 0.6:
            obj = rng.choice(variables)
        else:
            obj = t.object
        patterns.append(TriplePattern(subject, t.predicate, obj))
    used = {v for p in patterns for v in p.vars()}
    select = tuple(v for v in variables if v in used)
    if not select:
        # force at least one variable into the query
        t = rng.choice(triples)
        patterns.append(TriplePattern(variables[0], t.predicate, t.object))
        select = (variables[0],)
    filters = ()
    numeric_vars = [v for v in select if rng.random() < 0.2]
    if numeric_vars:
        filters = (Filter(numeric_vars[0], rng.choice(["<", "<=", ">", ">=", "="]),
                          rng.choice([0, 100, 0.5, 1000.0])),)
    return Query(select, tuple(patterns), filters)


# ------------------------------------------------------- misc oracles

def concat_dedup_union(graphs) -> tuple[set, dict]:
    """Naive merge oracle: concatenate triples and node registrations,
    deduplicate by equality."""
    triples: set[Triple] = set()
    nodes: dict[Guid, ProvNode] = {}
    for g in graphs:
        triples |= g.triples
        for guid, node in g.nodes.items():
            assert nodes.get(guid, node) == node, "oracle: node conflict"
            nodes[guid] = node
    return triples, nodes


def linear_fit_exact(points: list[tuple[int, int]]) -> bool:
    """True when every (x, y) lies exactly on the line through the
    first two points."""
    (x0, y0), (x1, y1) = points[0], points[1]
    # slope as a rational: y = y0 + (x - x0) * dy/dx without rounding
    dy, dx = y1 - y0, x1 - x0
    return all((x - x0) * dy % dx == 0 and
               y == y0 + (x - x0) * dy // dx
               for x, y in points)
