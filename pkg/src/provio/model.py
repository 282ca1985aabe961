"""Vocabulary and value types for I/O-centric provenance graphs.

Four super-classes partition every node: data objects (Entity), I/O
operations (Activity), operators (Agent), and workflow-specific facts
(Extensible).  Relations between nodes and literal-valued properties are
a closed predicate vocabulary spanning three namespaces.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum

PROV_NS = "http://www.w3.org/ns/prov#"
PROVIO_NS = "http://provio.dev/ns#"
EXT_NS = "http://provio.dev/ext#"

#: Canonical prefix labels used in every serialized file.
PREFIXES = {"prov": PROV_NS, "provio": PROVIO_NS, "ns1": EXT_NS}


class ProvioError(Exception):
    """Base class for all provenance-layer errors."""


class ConstraintError(ProvioError):
    """A predicate domain/range rule or value precondition was violated."""


class ConflictError(ProvioError):
    """Two registrations of one GUID disagree on sub-class or label."""


class SuperClass(Enum):
    ENTITY = "Entity"
    ACTIVITY = "Activity"
    AGENT = "Agent"
    EXTENSIBLE = "Extensible"


class SubClass(Enum):
    # Entity: data objects
    DIRECTORY = "Directory"
    FILE = "File"
    GROUP = "Group"
    DATASET = "Dataset"
    ATTRIBUTE = "Attribute"
    DATATYPE = "Datatype"
    LINK = "Link"
    # Activity: I/O APIs
    CREATE = "Create"
    OPEN = "Open"
    READ = "Read"
    WRITE = "Write"
    FSYNC = "Fsync"
    RENAME = "Rename"
    # Agent: operators
    USER = "User"
    RANK = "Rank"
    PROGRAM = "Program"
    THREAD = "Thread"
    # Extensible: workflow facts
    CHECKPOINT = "Checkpoint"
    TYPE = "Type"
    CONFIGURATION = "Configuration"
    METRICS = "Metrics"


_SUPER_OF = {
    **{s: SuperClass.ENTITY for s in (
        SubClass.DIRECTORY, SubClass.FILE, SubClass.GROUP, SubClass.DATASET,
        SubClass.ATTRIBUTE, SubClass.DATATYPE, SubClass.LINK)},
    **{s: SuperClass.ACTIVITY for s in (
        SubClass.CREATE, SubClass.OPEN, SubClass.READ, SubClass.WRITE,
        SubClass.FSYNC, SubClass.RENAME)},
    **{s: SuperClass.AGENT for s in (
        SubClass.USER, SubClass.RANK, SubClass.PROGRAM, SubClass.THREAD)},
    **{s: SuperClass.EXTENSIBLE for s in (
        SubClass.CHECKPOINT, SubClass.TYPE, SubClass.CONFIGURATION,
        SubClass.METRICS)},
}


def super_of(sub: SubClass) -> SuperClass:
    """Return the unique super-class owning ``sub``.  Total function."""
    return _SUPER_OF[sub]


def subclass_from_name(name: str) -> SubClass:
    """Case-insensitive sub-class lookup (config files use lowercase)."""
    try:
        return SubClass[name.upper()]
    except KeyError:
        raise ConstraintError(f"unknown sub-class name: {name!r}") from None


class Predicate(Enum):
    """Closed predicate vocabulary, in canonical serialization order."""

    # classification first
    WAS_MEMBER_OF = "prov:wasMemberOf"
    SUB_CLASS = "provio:subClass"
    # relations
    WAS_DERIVED_FROM = "prov:wasDerivedFrom"
    WAS_ATTRIBUTED_TO = "prov:wasAttributedTo"
    WAS_ASSOCIATED_WITH = "prov:wasAssociatedWith"
    ACTED_ON_BEHALF_OF = "prov:actedOnBehalfOf"
    INFLUENCED = "prov:influenced"
    WAS_CREATED_BY = "provio:wasCreatedBy"
    WAS_OPENED_BY = "provio:wasOpenedBy"
    WAS_READ_BY = "provio:wasReadBy"
    WAS_WRITTEN_BY = "provio:wasWrittenBy"
    WAS_FLUSHED_BY = "provio:wasFlushedBy"
    WAS_MODIFIED_BY = "provio:wasModifiedBy"
    # literal-valued properties
    ELAPSED = "provio:elapsed"
    HAS_ACCURACY = "provio:hasAccuracy"
    VERSION = "ns1:Version"
    HAS_VALUE = "ns1:hasValue"

    @property
    def prefixed(self) -> str:
        return self.value

    @property
    def local_name(self) -> str:
        return self.value.split(":", 1)[1]

    @property
    def iri(self) -> str:
        prefix, local = self.value.split(":", 1)
        return PREFIXES[prefix] + local

    def is_property(self) -> bool:
        """Property predicates take literal objects only."""
        return self in _PROPERTY_PREDICATES


_PROPERTY_PREDICATES = frozenset({
    Predicate.SUB_CLASS, Predicate.ELAPSED, Predicate.HAS_ACCURACY,
    Predicate.VERSION, Predicate.HAS_VALUE,
})

PREDICATE_BY_IRI = {p.iri: p for p in Predicate}

#: Fixed order used when serializing a subject's record.
PREDICATE_ORDER = {p: i for i, p in enumerate(Predicate)}


class Guid(str):
    """Globally unique node identifier.  A ``str`` subclass so that node
    references stay cheap and hashable while remaining distinguishable
    from string literals via ``isinstance``."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Guid({str.__repr__(self)})"


#: Objects of prov:wasMemberOf.  Extensible is not a W3C PROV class, so
#: its class IRI lives in the provio namespace.
SUPER_CLASS_IRI = {
    SuperClass.ENTITY: Guid("prov:Entity"),
    SuperClass.ACTIVITY: Guid("prov:Activity"),
    SuperClass.AGENT: Guid("prov:Agent"),
    SuperClass.EXTENSIBLE: Guid("provio:Extensible"),
}

SUPER_CLASS_BY_IRI = {v: k for k, v in SUPER_CLASS_IRI.items()}

Literal = str | int | float


@dataclass(frozen=True, slots=True)
class ProvNode:
    guid: Guid
    sub_class: SubClass
    label: str

    def __post_init__(self) -> None:
        if not self.guid:
            raise ConstraintError("node GUID must be non-empty")
        if not self.label:
            raise ConstraintError("node label must be non-empty")

    @property
    def super_class(self) -> SuperClass:
        return super_of(self.sub_class)


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Guid
    predicate: Predicate
    object: Guid | Literal

    def __post_init__(self) -> None:
        if self.predicate.is_property():
            if isinstance(self.object, Guid):
                raise ConstraintError(
                    f"{self.predicate.prefixed} takes a literal object")
        elif not isinstance(self.object, Guid):
            raise ConstraintError(
                f"{self.predicate.prefixed} takes a node object")


_RELATION_FOR_IO = {
    SubClass.CREATE: Predicate.WAS_CREATED_BY,
    SubClass.OPEN: Predicate.WAS_OPENED_BY,
    SubClass.READ: Predicate.WAS_READ_BY,
    SubClass.WRITE: Predicate.WAS_WRITTEN_BY,
    SubClass.FSYNC: Predicate.WAS_FLUSHED_BY,
    SubClass.RENAME: Predicate.WAS_MODIFIED_BY,
}


def relation_for_io(api: SubClass) -> Predicate:
    """Map an I/O API sub-class to the data-object relation it emits."""
    try:
        return _RELATION_FOR_IO[api]
    except KeyError:
        raise ConstraintError(f"{api.value} is not an I/O API sub-class") from None


# Domain/range table for relation predicates.  Objects of WAS_MEMBER_OF
# are super-class IRIs rather than nodes and are validated separately.
RELATION_DOMAIN_RANGE: dict[Predicate, tuple[frozenset[SuperClass], frozenset[SuperClass]]] = {
    Predicate.WAS_DERIVED_FROM: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ENTITY})),
    Predicate.WAS_ATTRIBUTED_TO: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.AGENT})),
    Predicate.WAS_ASSOCIATED_WITH: (
        frozenset({SuperClass.ACTIVITY}), frozenset({SuperClass.AGENT})),
    Predicate.ACTED_ON_BEHALF_OF: (
        frozenset({SuperClass.AGENT}), frozenset({SuperClass.AGENT})),
    Predicate.INFLUENCED: (
        frozenset({SuperClass.EXTENSIBLE}),
        frozenset({SuperClass.EXTENSIBLE, SuperClass.ENTITY})),
    Predicate.WAS_CREATED_BY: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ACTIVITY})),
    Predicate.WAS_OPENED_BY: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ACTIVITY})),
    Predicate.WAS_READ_BY: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ACTIVITY})),
    Predicate.WAS_WRITTEN_BY: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ACTIVITY})),
    Predicate.WAS_FLUSHED_BY: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ACTIVITY})),
    Predicate.WAS_MODIFIED_BY: (
        frozenset({SuperClass.ENTITY}), frozenset({SuperClass.ACTIVITY})),
}


def stable_agent_hash(sub_class: SubClass, label: str) -> str:
    key = f"{sub_class.value}:{label}".encode()
    return hashlib.blake2b(key, digest_size=4).hexdigest()


def mint_guid(sub_class: SubClass, label: str, *, rank: int = 0,
              seq: int = 0, instance: str = "") -> Guid:
    """Mint the GUID for a node.

    Agents get a stable hashed suffix so the same user/program name
    yields the same GUID in every process; Entities and Extensibles use
    their canonical name directly; Activities are unique per instance.
    ``instance`` is the per-process discriminator (the tracker passes
    its program hash): two processes of different programs may share a
    rank, so rank + sequence alone would collide on merge.
    """
    if not label:
        raise ConstraintError("cannot mint a GUID for an empty label")
    sup = super_of(sub_class)
    if sup is SuperClass.AGENT:
        return Guid(f"{label}--a{stable_agent_hash(sub_class, label)}")
    if sup is SuperClass.ACTIVITY:
        suffix = f".{instance}" if instance else ""
        return Guid(f"{label}--b{rank}.{seq}{suffix}")
    return Guid(label)


_AGENT_SUFFIX = re.compile(r"\A(.+)--a[0-9a-f]+\Z", re.DOTALL)
_ACTIVITY_SUFFIX = re.compile(r"\A(.+)--b\d+\.\d+(?:\.[0-9a-f]+)?\Z",
                              re.DOTALL)


def label_from_guid(guid: Guid, sub_class: SubClass) -> str:
    """Invert :func:`mint_guid`'s suffixing for the given sub-class."""
    sup = super_of(sub_class)
    if sup is SuperClass.AGENT:
        m = _AGENT_SUFFIX.match(guid)
        if m:
            return m.group(1)
    elif sup is SuperClass.ACTIVITY:
        m = _ACTIVITY_SUFFIX.match(guid)
        if m:
            return m.group(1)
    return str(guid)


def make_node(sub_class: SubClass, label: str, *, rank: int = 0,
              seq: int = 0, instance: str = "") -> ProvNode:
    return ProvNode(
        mint_guid(sub_class, label, rank=rank, seq=seq, instance=instance),
        sub_class, label)
