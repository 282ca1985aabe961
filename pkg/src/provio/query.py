"""Conjunctive triple-pattern queries and the integrated lineage APIs.

The text syntax is a small SPARQL subset: ``SELECT ?v ... WHERE { ... }``
with ``;`` same-subject continuation, ``.`` separators, predicates always
bound, and numeric ``FILTER(?v <op> n)`` clauses.  Evaluation is an exact
conjunctive join whose result is independent of pattern order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    PREDICATE_BY_IRI,
    PREFIXES,
    SUPER_CLASS_BY_IRI,
    SUPER_CLASS_IRI,
    Guid,
    Literal,
    Predicate,
    ProvioError,
    SubClass,
    SuperClass,
    super_of,
)
from .store import ProvGraph


class QueryError(ProvioError):
    """Malformed query or unresolvable query input."""


class UnsupportedFeatureError(QueryError):
    """The query uses SPARQL features outside the supported subset."""


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


Term = Var | Guid | Literal


@dataclass(frozen=True, slots=True)
class TriplePattern:
    subject: Var | Guid
    predicate: Predicate  # always bound
    object: Term

    def vars(self) -> set[Var]:
        out = set()
        if isinstance(self.subject, Var):
            out.add(self.subject)
        if isinstance(self.object, Var):
            out.add(self.object)
        return out


_COMPARATORS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


@dataclass(frozen=True, slots=True)
class Filter:
    var: Var
    op: str
    bound: int | float

    def accepts(self, value) -> bool:
        if isinstance(value, Guid) or not isinstance(value, (int, float)):
            return False
        return _COMPARATORS[self.op](value, self.bound)


@dataclass(frozen=True)
class Query:
    select: tuple[Var, ...]
    where: tuple[TriplePattern, ...]
    filters: tuple[Filter, ...] = ()

    def __post_init__(self):
        pattern_vars = set().union(*(p.vars() for p in self.where)) \
            if self.where else set()
        for v in self.select:
            if v not in pattern_vars:
                raise QueryError(f"selected variable {v} appears in no pattern")
        for f in self.filters:
            if f.var not in pattern_vars:
                raise QueryError(f"filtered variable {f.var} appears in no pattern")


@dataclass
class BindingSet:
    variables: tuple[Var, ...]
    rows: list[dict[Var, Term]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, var: Var | str) -> list:
        if isinstance(var, str):
            var = Var(var)
        return [row[var] for row in self.rows]

    def as_tuples(self) -> list[tuple]:
        return [tuple(row[v] for v in self.variables) for row in self.rows]


def _term_key(value) -> tuple:
    if isinstance(value, Guid):
        return (0, str(value), 0.0)
    if isinstance(value, str):
        return (1, value, 0.0)
    return (2, "", float(value))


# ------------------------------------------------------------ evaluation

def _estimate(g: ProvGraph, pattern: TriplePattern,
              bound: set[Var]) -> tuple[int, int]:
    """Join-order key: fewer unbound positions first, then the smallest
    index pool."""
    s_bound = not isinstance(pattern.subject, Var) or pattern.subject in bound
    o_bound = not isinstance(pattern.object, Var) or pattern.object in bound
    unbound = (0 if s_bound else 1) + (0 if o_bound else 1)
    pool = len(g.scan(p=pattern.predicate))
    return (unbound, pool)


def _match(g: ProvGraph, pattern: TriplePattern,
           binding: dict[Var, Term]) -> list[dict[Var, Term]]:
    s = pattern.subject
    o = pattern.object
    if isinstance(s, Var) and s in binding:
        s = binding[s]
    if isinstance(o, Var) and o in binding:
        o = binding[o]
    scan_s = None if isinstance(s, Var) else s
    scan_o = None if isinstance(o, Var) else o
    if scan_s is not None and not isinstance(scan_s, Guid):
        return []  # subjects are always nodes
    out = []
    for t in g.scan(s=scan_s, p=pattern.predicate, o=scan_o):
        row = dict(binding)
        if isinstance(s, Var):
            row[s] = t.subject
        if isinstance(o, Var):
            # same variable in both positions must bind consistently
            if o in row and row[o] != t.object:
                continue
            row[o] = t.object
        out.append(row)
    return out


def evaluate(g: ProvGraph, q: Query) -> BindingSet:
    """Exact solutions of the conjunction, filtered, projected onto the
    selected variables, duplicate-free, deterministically ordered."""
    if not q.where:
        raise QueryError("query has an empty WHERE block")
    solutions: list[dict[Var, Term]] = [{}]
    remaining = list(q.where)
    bound: set[Var] = set()
    while remaining and solutions:
        remaining.sort(key=lambda p: _estimate(g, p, bound))
        pattern = remaining.pop(0)
        solutions = [row for sol in solutions for row in _match(g, pattern, sol)]
        bound |= pattern.vars()
    if remaining:  # solutions went empty; all conjuncts still fail
        solutions = []
    for f in q.filters:
        solutions = [sol for sol in solutions if f.accepts(sol[f.var])]
    select = q.select or tuple(sorted(bound, key=lambda v: v.name))
    seen = set()
    rows: list[dict[Var, Term]] = []
    for sol in solutions:
        projected = {v: sol[v] for v in select}
        key = tuple(_term_key(projected[v]) for v in select)
        if key not in seen:
            seen.add(key)
            rows.append(projected)
    rows.sort(key=lambda r: tuple(_term_key(r[v]) for v in select))
    return BindingSet(tuple(select), rows)


# ------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<iri><[^>]*>)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}();.])
  | (?P<op><=|>=|<|>|=)
  | (?P<name>[A-Za-z_@][A-Za-z0-9_:.@-]*)
""", re.VERBOSE)

_UNSUPPORTED = {"OPTIONAL", "UNION", "MINUS", "GRAPH", "SERVICE", "BIND",
                "VALUES", "GROUP", "ORDER", "LIMIT", "OFFSET", "DISTINCT",
                "CONSTRUCT", "ASK", "DESCRIBE", "EXISTS"}


def _tokenize_query(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    line = 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QueryError(f"line {line}: unexpected character {text[pos]!r}")
        kind = m.lastgroup
        value = m.group()
        line += value.count("\n")
        pos = m.end()
        if kind in ("ws", "comment"):
            continue
        tokens.append((kind, value, line))
    return tokens


def _parse_term(kind: str, value: str, line: int,
                prefixes: dict[str, str]) -> Term:
    if kind == "var":
        return Var(value[1:])
    if kind == "iri":
        return Guid(value[1:-1])
    if kind == "string":
        return value[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    if kind == "number":
        return float(value) if "." in value else int(value)
    if kind == "name" and ":" in value:
        prefix, local = value.split(":", 1)
        if prefix not in prefixes:
            raise QueryError(f"line {line}: undeclared prefix {prefix!r}")
        iri = prefixes[prefix] + local
        for sc_guid in SUPER_CLASS_BY_IRI:
            p, l = str(sc_guid).split(":", 1)
            if PREFIXES[p] + l == iri:
                return sc_guid
        raise QueryError(
            f"line {line}: {value!r} is not a known term (only super-class "
            "IRIs may appear as prefixed names in term position)")
    raise QueryError(f"line {line}: unexpected token {value!r}")


def parse_query(text: str) -> Query:
    """Parse the supported subset; reject anything beyond it loudly."""
    tokens = _tokenize_query(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expect_kind: str | None = None, expect_value: str | None = None):
        nonlocal pos
        tok = peek()
        if tok is None:
            raise QueryError("unexpected end of query")
        kind, value, line = tok
        if kind == "name" and value.upper() in _UNSUPPORTED:
            raise UnsupportedFeatureError(
                f"line {line}: {value} is outside the supported subset")
        if expect_kind is not None and kind != expect_kind:
            raise QueryError(f"line {line}: expected {expect_kind}, got {value!r}")
        if expect_value is not None and value != expect_value:
            raise QueryError(f"line {line}: expected {expect_value!r}, got {value!r}")
        pos += 1
        return tok

    prefixes = dict(PREFIXES)
    while True:
        tok = peek()
        if tok is None:
            raise QueryError("empty query")
        if tok[0] == "name" and tok[1].upper() == "PREFIX":
            take()
            label_tok = take("name")
            if not label_tok[1].endswith(":"):
                raise QueryError(f"line {label_tok[2]}: malformed PREFIX label")
            iri_tok = take("iri")
            prefixes[label_tok[1][:-1]] = iri_tok[1][1:-1]
        else:
            break

    kw = take("name")
    if kw[1].upper() != "SELECT":
        raise QueryError(f"line {kw[2]}: expected SELECT, got {kw[1]!r}")
    select: list[Var] = []
    while peek() is not None and peek()[0] == "var":
        select.append(Var(take("var")[1][1:]))
    if not select:
        raise QueryError("SELECT names no variables")
    kw = take("name")
    if kw[1].upper() != "WHERE":
        raise QueryError(f"line {kw[2]}: expected WHERE, got {kw[1]!r}")
    take("punct", "{")

    patterns: list[TriplePattern] = []
    filters: list[Filter] = []
    while True:
        tok = peek()
        if tok is None:
            raise QueryError("unterminated WHERE block")
        if tok[0] == "punct" and tok[1] == "}":
            take()
            break
        if tok[0] == "name" and tok[1].upper() == "FILTER":
            take()
            take("punct", "(")
            var_tok = take("var")
            op_tok = take("op")
            num_tok = take("number")
            take("punct", ")")
            bound = float(num_tok[1]) if "." in num_tok[1] else int(num_tok[1])
            filters.append(Filter(Var(var_tok[1][1:]), op_tok[1], bound))
            continue
        # one subject record: subject (predicate object) (';' ...)* '.'
        kind, value, line = take()
        subject = _parse_term(kind, value, line, prefixes)
        if not isinstance(subject, (Var, Guid)):
            raise QueryError(f"line {line}: literal cannot be a subject")
        while True:
            pk, pv, pl = take("name")
            if ":" not in pv:
                raise QueryError(f"line {pl}: expected a predicate, got {pv!r}")
            prefix, local = pv.split(":", 1)
            if prefix not in prefixes:
                raise QueryError(f"line {pl}: undeclared prefix {prefix!r}")
            predicate = PREDICATE_BY_IRI.get(prefixes[prefix] + local)
            if predicate is None:
                raise QueryError(f"line {pl}: unknown predicate {pv!r}")
            ok, ov, ol = take()
            obj = _parse_term(ok, ov, ol, prefixes)
            patterns.append(TriplePattern(subject, predicate, obj))
            end = take("punct")
            if end[1] == ".":
                break
            if end[1] != ";":
                raise QueryError(f"line {end[2]}: expected ';' or '.'")

    if not patterns:
        raise QueryError("WHERE block contains no patterns")
    return Query(tuple(select), tuple(patterns), tuple(filters))


# ------------------------------------------------- integrated lineage APIs

@dataclass(frozen=True, slots=True)
class LineageStep:
    entity: Guid
    via_program: Guid
    via_activity: Guid


@dataclass
class LineageTree:
    root: Guid
    levels: list[list[LineageStep]]

    def entities_at(self, level: int) -> set[Guid]:
        """1-based level accessor."""
        if level < 1 or level > len(self.levels):
            return set()
        return {step.entity for step in self.levels[level - 1]}


def _require_entity(g: ProvGraph, guid: Guid) -> None:
    node = g.node(guid)
    if node is None:
        raise QueryError(f"unknown object {guid!s}")
    if node.super_class is not SuperClass.ENTITY:
        raise QueryError(f"{guid!s} is a {node.super_class.value}, not an Entity")


def backward_lineage(g: ProvGraph, obj: Guid | str, levels: int) -> LineageTree:
    """Predecessor tree: at each step, entities read by an activity of a
    program to which the previous entity is attributed.  Cycles are cut
    by a visited set; the tree stops early when a level is empty."""
    if levels < 1:
        raise QueryError("levels must be >= 1")
    root = Guid(obj)
    _require_entity(g, root)
    visited = {root}
    frontier = [root]
    out: list[list[LineageStep]] = []
    for _ in range(levels):
        steps: list[LineageStep] = []
        for entity in frontier:
            for t1 in g.scan(s=entity, p=Predicate.WAS_ATTRIBUTED_TO):
                program = Guid(t1.object)
                for t2 in g.scan(p=Predicate.WAS_ATTRIBUTED_TO, o=program):
                    candidate = t2.subject
                    if candidate in visited:
                        continue
                    for t3 in g.scan(s=candidate, p=Predicate.WAS_READ_BY):
                        activity = Guid(t3.object)
                        if g.scan(s=activity, p=Predicate.WAS_ASSOCIATED_WITH,
                                  o=program):
                            steps.append(LineageStep(candidate, program,
                                                     activity))
        steps = sorted(set(steps),
                       key=lambda s: (str(s.entity), str(s.via_program),
                                      str(s.via_activity)))
        if not steps:
            break
        frontier = sorted({s.entity for s in steps}, key=str)
        visited.update(frontier)
        out.append(steps)
    return LineageTree(root, out)


def io_stats(g: ProvGraph, with_durations: bool = False,
             ) -> dict[SubClass, tuple[int, int | None]]:
    """Event count per I/O API sub-class, with accumulated elapsed time
    when requested.  Sub-classes with zero events are omitted."""
    counts: dict[SubClass, int] = {}
    totals: dict[SubClass, int] = {}
    have_elapsed = False
    for t in g.scan(p=Predicate.WAS_MEMBER_OF,
                    o=SUPER_CLASS_IRI[SuperClass.ACTIVITY]):
        node = g.node(t.subject)
        if node is None:
            continue
        counts[node.sub_class] = counts.get(node.sub_class, 0) + 1
        if with_durations:
            for e in g.scan(s=t.subject, p=Predicate.ELAPSED):
                have_elapsed = True
                totals[node.sub_class] = totals.get(node.sub_class, 0) \
                    + int(e.object)
    if with_durations and not have_elapsed:
        raise QueryError("durations not tracked in this graph")
    return {sc: (n, totals.get(sc, 0) if with_durations else None)
            for sc, n in sorted(counts.items(), key=lambda kv: kv[0].value)}


def file_modifiers(g: ProvGraph, file: Guid | str,
                   ) -> list[tuple[Guid, Guid, Guid]]:
    """Deduplicated (program, thread, user) agent chains attributed to
    one file."""
    guid = Guid(file)
    _require_entity(g, guid)
    chains: set[tuple[Guid, Guid, Guid]] = set()
    for t1 in g.scan(s=guid, p=Predicate.WAS_ATTRIBUTED_TO):
        program = Guid(t1.object)
        for t2 in g.scan(s=program, p=Predicate.ACTED_ON_BEHALF_OF):
            thread = Guid(t2.object)
            for t3 in g.scan(s=thread, p=Predicate.ACTED_ON_BEHALF_OF):
                chains.add((program, thread, Guid(t3.object)))
    return sorted(chains, key=lambda c: tuple(map(str, c)))


def config_accuracy_map(g: ProvGraph) -> list[tuple[str, Literal, Literal]]:
    """(configuration name, version, accuracy) rows, one per pairing of
    a version literal with an accuracy literal on one node."""
    rows: list[tuple[str, Literal, Literal]] = []
    for t in g.scan(p=Predicate.SUB_CLASS, o=SubClass.CONFIGURATION.value):
        node = g.node(t.subject)
        if node is None or node.sub_class is not SubClass.CONFIGURATION:
            continue
        versions = [v.object for v in g.scan(s=t.subject, p=Predicate.VERSION)]
        accuracies = [a.object for a in
                      g.scan(s=t.subject, p=Predicate.HAS_ACCURACY)]
        for version in versions:
            for accuracy in accuracies:
                rows.append((node.label, version, accuracy))
    rows.sort(key=lambda r: (_term_key(r[1]), _term_key(r[2]), r[0]))
    return rows


def _config_name_matches(label: str, name: str) -> bool:
    lower, want = label.lower(), name.lower()
    return lower == want or lower.startswith(want + "_")


def consistent_checkpoints(
        g: ProvGraph,
        constraints: list[tuple[str, Literal]],
        quality: tuple[Predicate | str, str, int | float] | None = None,
        ) -> list[Guid]:
    """Checkpoints influenced by configurations matching every
    (name, required value) constraint, optionally filtered by a numeric
    quality property on the checkpoint itself."""
    if not constraints:
        raise QueryError("at least one configuration constraint is required")
    survivors: set[Guid] | None = None
    for name, required in constraints:
        matched_name = False
        ckpts: set[Guid] = set()
        for t in g.scan(p=Predicate.SUB_CLASS, o=SubClass.CONFIGURATION.value):
            node = g.node(t.subject)
            if node is None or not _config_name_matches(node.label, name):
                continue
            matched_name = True
            values = {v.object for v in g.scan(s=t.subject,
                                               p=Predicate.HAS_VALUE)}
            if required not in values:
                continue
            for link in g.scan(s=t.subject, p=Predicate.INFLUENCED):
                target = g.node(Guid(link.object))
                if target is not None and target.sub_class is SubClass.CHECKPOINT:
                    ckpts.add(Guid(link.object))
        if not matched_name:
            raise QueryError(f"unknown configuration name {name!r}")
        survivors = ckpts if survivors is None else survivors & ckpts
    assert survivors is not None
    if quality is not None:
        prop, op, bound = quality
        if isinstance(prop, str):
            pred = next((p for p in Predicate if p.prefixed == prop), None)
            if pred is None or not pred.is_property():
                raise QueryError(f"unknown quality property {prop!r}")
            prop = pred
        if op not in _COMPARATORS:
            raise QueryError(f"unknown comparator {op!r}")
        flt = _COMPARATORS[op]
        survivors = {c for c in survivors
                     if any(not isinstance(t.object, (Guid,)) and
                            isinstance(t.object, (int, float)) and
                            flt(t.object, bound)
                            for t in g.scan(s=c, p=prop))}
    return sorted(survivors, key=str)
