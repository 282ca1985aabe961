"""Indexed in-memory provenance graph with deterministic Turtle I/O.

One graph instance is written by one tracker session and serialized to a
per-process ``.ttl`` file; files from all processes of a run are parsed
back and merged offline.  Because node identifiers are globally unique
and deterministic for shared agents/entities, the merge is a plain
keyed/set union with hard errors on divergent registrations.
"""

from __future__ import annotations

import os
import tempfile
from collections.abc import Iterable
from decimal import Decimal

from .model import (
    PREDICATE_BY_IRI,
    PREDICATE_ORDER,
    PREFIXES,
    RELATION_DOMAIN_RANGE,
    SUPER_CLASS_BY_IRI,
    SUPER_CLASS_IRI,
    ConflictError,
    ConstraintError,
    Guid,
    Literal,
    Predicate,
    ProvNode,
    ProvioError,
    SubClass,
    Triple,
    label_from_guid,
    subclass_from_name,
    super_of,
)


class ParseError(ProvioError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ProvGraph:
    """Set of typed nodes plus a duplicate-free triple set with
    subject/predicate/object hash indexes."""

    def __init__(self) -> None:
        self.nodes: dict[Guid, ProvNode] = {}
        self.triples: set[Triple] = set()
        self._by_s: dict[Guid, set[Triple]] = {}
        self._by_p: dict[Predicate, set[Triple]] = {}
        self._by_o: dict[object, set[Triple]] = {}

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self.triples

    def node(self, guid: Guid) -> ProvNode | None:
        return self.nodes.get(guid)

    # -- mutation ---------------------------------------------------

    def add_node(self, n: ProvNode) -> None:
        """Register a node; idempotent for identical content, an error
        for a diverging re-registration of the same GUID."""
        existing = self.nodes.get(n.guid)
        if existing is not None:
            if existing.sub_class is not n.sub_class or existing.label != n.label:
                raise ConflictError(
                    f"GUID {n.guid!s} already registered as "
                    f"{existing.sub_class.value} {existing.label!r}")
            return
        self.nodes[n.guid] = n
        self._insert(Triple(n.guid, Predicate.WAS_MEMBER_OF,
                            SUPER_CLASS_IRI[n.super_class]))
        self._insert(Triple(n.guid, Predicate.SUB_CLASS, n.sub_class.value))

    def add_triple(self, t: Triple) -> None:
        """Insert one statement; duplicate insertion is a no-op."""
        self._check_endpoints(t)
        self._insert(t)

    def _insert(self, t: Triple) -> None:
        if t in self.triples:
            return
        self.triples.add(t)
        self._by_s.setdefault(t.subject, set()).add(t)
        self._by_p.setdefault(t.predicate, set()).add(t)
        self._by_o.setdefault(t.object, set()).add(t)

    def _check_endpoints(self, t: Triple) -> None:
        subj = self.nodes.get(t.subject)
        if subj is None:
            raise ConstraintError(f"unregistered subject GUID {t.subject!s}")
        if t.predicate is Predicate.WAS_MEMBER_OF:
            if t.object != SUPER_CLASS_IRI[subj.super_class]:
                raise ConstraintError(
                    f"{t.subject!s} is a {subj.super_class.value}, not {t.object!s}")
            return
        if t.predicate.is_property():
            return
        if t.object not in self.nodes:
            raise ConstraintError(f"unregistered object GUID {t.object!s}")
        domain, rng = RELATION_DOMAIN_RANGE[t.predicate]
        obj = self.nodes[Guid(t.object)]
        if subj.super_class not in domain:
            raise ConstraintError(
                f"{t.predicate.prefixed} subject must be "
                f"{'/'.join(sorted(s.value for s in domain))}, "
                f"got {subj.super_class.value} {t.subject!s}")
        if obj.super_class not in rng:
            raise ConstraintError(
                f"{t.predicate.prefixed} object must be "
                f"{'/'.join(sorted(s.value for s in rng))}, "
                f"got {obj.super_class.value} {t.object!s}")

    # -- lookup -----------------------------------------------------

    def scan(self, s: Guid | None = None, p: Predicate | None = None,
             o: Guid | Literal | None = None) -> list[Triple]:
        """All triples matching the bound positions.  Index-backed: a
        bound subject or object never triggers a full scan."""
        if s is not None:
            pool: Iterable[Triple] = self._by_s.get(s, ())
        elif o is not None:
            pool = self._by_o.get(o, ())
        elif p is not None:
            pool = self._by_p.get(p, ())
        else:
            pool = self.triples
        out = [t for t in pool
               if (p is None or t.predicate is p)
               and (o is None or t.object == o)
               and (s is None or t.subject == s)]
        out.sort(key=_triple_sort_key)
        return out

    def subjects(self) -> list[Guid]:
        return sorted(self._by_s, key=str)

    def validate(self) -> None:
        """Referential-integrity check used by tests after mutations."""
        for t in self.triples:
            if t.subject not in self.nodes:
                raise ConstraintError(f"dangling subject {t.subject!s}")
            if (isinstance(t.object, Guid) and t.object not in self.nodes
                    and t.object not in SUPER_CLASS_BY_IRI):
                raise ConstraintError(f"dangling object {t.object!s}")
        for guid in self.nodes:
            members = [t for t in self._by_s.get(guid, ())
                       if t.predicate is Predicate.WAS_MEMBER_OF]
            if len(members) != 1:
                raise ConstraintError(
                    f"{guid!s} has {len(members)} membership triples")

    def copy(self) -> "ProvGraph":
        g = ProvGraph()
        g.nodes = dict(self.nodes)
        for t in self.triples:
            g._insert(t)
        return g


def merge(graphs: Iterable[ProvGraph]) -> ProvGraph:
    """Union of node maps and triple sets.  Shared GUIDs must agree on
    sub-class and label; divergence is a hard error, never a silent
    last-writer-wins."""
    out = ProvGraph()
    for g in graphs:
        for n in g.nodes.values():
            out.add_node(n)
        for t in g.triples:
            out._insert(t)
    return out


# ---------------------------------------------------------------- turtle

_IRI_ESCAPE = {c: f"%{ord(c):02X}" for c in ' <>"{}|^`\\%'}


def _escape_iri(text: str) -> str:
    return "".join(_IRI_ESCAPE.get(c, c) if ord(c) > 0x20 else f"%{ord(c):02X}"
                   for c in text)


def _unescape_iri(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "%" and i + 3 <= len(text):
            out.append(chr(int(text[i + 1:i + 3], 16)))
            i += 3
        else:
            out.append(c)
            i += 1
    return "".join(out)


_STR_ESCAPE = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape_literal(text: str) -> str:
    out = []
    for c in text:
        if c in _STR_ESCAPE:
            out.append(_STR_ESCAPE[c])
        elif ord(c) < 0x20:
            out.append(f"\\u{ord(c):04X}")
        else:
            out.append(c)
    return "".join(out)


def _format_number(v: int | float) -> str:
    if isinstance(v, int):
        return str(v)
    r = repr(v)
    if "e" in r or "E" in r:
        # Turtle decimals carry no exponent; expand the exact binary value.
        r = format(Decimal(v), "f")
    if "." not in r:
        r += ".0"
    return r


def _term_text(obj: Guid | Literal) -> str:
    if isinstance(obj, Guid):
        if obj in SUPER_CLASS_BY_IRI:
            return str(obj)
        return f"<{_escape_iri(str(obj))}>"
    if isinstance(obj, str):
        return f'"{_escape_literal(obj)}"'
    return _format_number(obj)


def _object_sort_key(obj: Guid | Literal):
    if isinstance(obj, Guid):
        return (0, str(obj), 0.0)
    if isinstance(obj, str):
        return (1, obj, 0.0)
    return (2, "", float(obj))


def _triple_sort_key(t: Triple):
    return (str(t.subject), PREDICATE_ORDER[t.predicate],
            _object_sort_key(t.object))


def serialize_turtle(g: ProvGraph) -> str:
    """Byte-deterministic Turtle: fixed prefix block, subjects sorted
    lexicographically by GUID, predicates in vocabulary order, records
    grouped with ``;`` continuation."""
    lines = [f"@prefix {p}: <{iri}> ." for p, iri in PREFIXES.items()]
    lines.append("")
    for subject in g.subjects():
        stmts = sorted(g._by_s[subject], key=_triple_sort_key)
        head = _term_text(subject)
        for i, t in enumerate(stmts):
            lead = head if i == 0 else "    "
            tail = " ;" if i < len(stmts) - 1 else " ."
            lines.append(f"{lead} {t.predicate.prefixed} {_term_text(t.object)}{tail}")
        lines.append("")
    if lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n"


class _Token:
    __slots__ = ("kind", "value", "line")

    def __init__(self, kind: str, value, line: int):
        self.kind = kind
        self.value = value
        self.line = line


def _tokenize(text: str):
    tokens: list[_Token] = []
    line = 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c in " \t\r":
            i += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c == "<":
            j = text.find(">", i + 1)
            if j < 0:
                raise ParseError("unterminated IRI reference", line)
            tokens.append(_Token("iri", _unescape_iri(text[i + 1:j]), line))
            i = j + 1
        elif c == '"':
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", line)
                ch = text[j]
                if ch == "\\":
                    if j + 1 >= n:
                        raise ParseError("dangling escape", line)
                    esc = text[j + 1]
                    if esc == "u":
                        buf.append(chr(int(text[j + 2:j + 6], 16)))
                        j += 6
                        continue
                    try:
                        buf.append({"n": "\n", "r": "\r", "t": "\t",
                                    '"': '"', "\\": "\\"}[esc])
                    except KeyError:
                        raise ParseError(f"bad escape \\{esc}", line) from None
                    j += 2
                elif ch == '"':
                    break
                elif ch == "\n":
                    raise ParseError("newline in string literal", line)
                else:
                    buf.append(ch)
                    j += 1
            tokens.append(_Token("string", "".join(buf), line))
            i = j + 1
        elif c in ";.":
            # '.' inside a number is handled below; bare '.' ends a record
            tokens.append(_Token(c, c, line))
            i += 1
        elif c == "-" or c.isdigit():
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            word = text[i:j]
            # a trailing '.' is the statement terminator, not number syntax
            if word.endswith("."):
                word = word[:-1]
                j -= 1
            try:
                value: int | float = float(word) if "." in word else int(word)
            except ValueError:
                raise ParseError(f"malformed number {word!r}", line) from None
            tokens.append(_Token("number", value, line))
            i = j
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n;.#<">':
                j += 1
            word = text[i:j]
            # prefixed names may carry a trailing dot-free local part; a
            # '.' always terminates since our vocabulary contains none.
            if not word:
                raise ParseError(f"unexpected character {c!r}", line)
            tokens.append(_Token("name", word, line))
            i = j
    return tokens


def parse_turtle(text: str) -> ProvGraph:
    """Parse the Turtle subset written by :func:`serialize_turtle`.

    Rejects undeclared prefixes and predicates outside the vocabulary;
    errors carry the offending line number.
    """
    tokens = _tokenize(text)
    pos = 0
    prefixes: dict[str, str] = {}
    raw: list[tuple[Guid, Predicate, Guid | Literal, int]] = []

    def peek() -> _Token | None:
        return tokens[pos] if pos < len(tokens) else None

    def take(kind: str | None = None) -> _Token:
        nonlocal pos
        tok = peek()
        if tok is None:
            last = tokens[-1].line if tokens else 1
            raise ParseError("unexpected end of document", last)
        if kind is not None and tok.kind != kind:
            raise ParseError(f"expected {kind}, got {tok.kind} {tok.value!r}",
                             tok.line)
        pos += 1
        return tok

    def resolve_prefixed(word: str, line: int) -> str:
        if ":" not in word:
            raise ParseError(f"expected a prefixed name, got {word!r}", line)
        prefix, local = word.split(":", 1)
        if prefix not in prefixes:
            raise ParseError(f"undeclared prefix {prefix!r}", line)
        return prefixes[prefix] + local

    def node_term(tok: _Token) -> Guid:
        if tok.kind == "iri":
            return Guid(tok.value)
        if tok.kind == "name":
            iri = resolve_prefixed(tok.value, tok.line)
            for sc_guid in SUPER_CLASS_BY_IRI:
                prefix, local = str(sc_guid).split(":", 1)
                if PREFIXES[prefix] + local == iri:
                    return sc_guid
            raise ParseError(
                f"prefixed name {tok.value!r} is not a super-class IRI",
                tok.line)
        raise ParseError(f"expected a node term, got {tok.kind}", tok.line)

    while peek() is not None:
        tok = take()
        if tok.kind == "name" and tok.value == "@prefix":
            label_tok = take("name")
            label = label_tok.value
            if not label.endswith(":"):
                raise ParseError("malformed @prefix label", label_tok.line)
            iri_tok = take("iri")
            take(".")
            prefixes[label[:-1]] = iri_tok.value
            continue
        # statement block: subject then (predicate object) groups
        subject = node_term(tok)
        while True:
            ptok = take("name")
            iri = resolve_prefixed(ptok.value, ptok.line)
            pred = PREDICATE_BY_IRI.get(iri)
            if pred is None:
                raise ParseError(f"unknown predicate {ptok.value!r}", ptok.line)
            otok = take()
            obj: Guid | Literal
            if otok.kind in ("iri", "name"):
                obj = node_term(otok)
            elif otok.kind == "string":
                obj = otok.value
            elif otok.kind == "number":
                obj = otok.value
            else:
                raise ParseError(f"expected an object, got {otok.kind}",
                                 otok.line)
            raw.append((subject, pred, obj, ptok.line))
            end = take()
            if end.kind == ".":
                break
            if end.kind != ";":
                raise ParseError("expected ';' or '.'", end.line)

    return _graph_from_statements(raw)


def _graph_from_statements(
        raw: list[tuple[Guid, Predicate, Guid | Literal, int]]) -> ProvGraph:
    g = ProvGraph()
    sub_classes: dict[Guid, tuple[SubClass, int]] = {}
    for subject, pred, obj, line in raw:
        if pred is Predicate.SUB_CLASS:
            if not isinstance(obj, str) or isinstance(obj, Guid):
                raise ParseError("provio:subClass takes a string literal", line)
            try:
                sc = subclass_from_name(obj)
            except ConstraintError as exc:
                raise ParseError(str(exc), line) from None
            prev = sub_classes.get(subject)
            if prev is not None and prev[0] is not sc:
                raise ParseError(
                    f"{subject!s} declared as both {prev[0].value} and {sc.value}",
                    line)
            sub_classes[subject] = (sc, line)
    for guid, (sc, _line) in sub_classes.items():
        g.add_node(ProvNode(guid, sc, label_from_guid(guid, sc)))
    for subject, pred, obj, line in raw:
        if pred in (Predicate.SUB_CLASS, Predicate.WAS_MEMBER_OF):
            # re-validated below against the reconstructed node
            if pred is Predicate.WAS_MEMBER_OF:
                node = g.node(subject)
                if node is None:
                    raise ParseError(f"{subject!s} has no provio:subClass record",
                                     line)
                if obj != SUPER_CLASS_IRI[node.super_class]:
                    raise ParseError(
                        f"{subject!s} membership {obj!s} contradicts its "
                        f"sub-class {node.sub_class.value}", line)
            continue
        try:
            g.add_triple(Triple(subject, pred, obj))
        except ProvioError as exc:
            raise ParseError(str(exc), line) from None
    g.validate()
    return g


def load_turtle_file(path) -> ProvGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_turtle(fh.read())


def merge_directory(directory) -> ProvGraph:
    """Parse and merge every ``.ttl`` sub-graph file in a directory."""
    from pathlib import Path

    paths = sorted(Path(directory).glob("*.ttl"))
    return merge(load_turtle_file(p) for p in paths)


def write_turtle_file(g: ProvGraph, path) -> None:
    text = serialize_turtle(g)
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ttl.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
