"""Per-process capture runtime.

A session owns one in-memory graph, the identity chain of the running
process (user / rank / program), a monotonic activity counter, and the
flush machinery that serializes the graph to a per-process Turtle file.
Recording is observation-only: failures inside the tracking path are
counted, never raised into the caller's I/O path.
"""

from __future__ import annotations

import configparser
import os
import tempfile
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

from .model import (
    ConstraintError,
    Guid,
    Literal,
    Predicate,
    ProvNode,
    ProvioError,
    SubClass,
    SuperClass,
    Triple,
    make_node,
    mint_guid,
    relation_for_io,
    stable_agent_hash,
    super_of,
)
from .store import ProvGraph, serialize_turtle

CONFIG_ENV_VAR = "PROVIO_CONFIG"

#: Returned by record_extensible when the sub-class is disabled.
UNTRACKED = Guid("untracked")

ALL_SUBCLASSES = frozenset(SubClass)

#: Properties accepted in record_extensible payloads.
_EXTENSIBLE_PROPERTIES = {
    p.prefixed: p for p in (
        Predicate.VERSION, Predicate.HAS_VALUE, Predicate.HAS_ACCURACY,
        Predicate.ELAPSED)
}


class SessionError(ProvioError):
    """Session lifecycle misuse (double end, unwritable output dir)."""


@dataclass(frozen=True)
class AgentContext:
    """Identity of the running process: who, which program, which rank."""

    user: str
    program: str
    rank: int = 0
    thread_label: str = ""
    thread_kind: SubClass = SubClass.RANK

    def __post_init__(self):
        if not self.user or not self.program:
            raise ConstraintError("user and program names must be non-empty")
        if self.rank < 0:
            raise ConstraintError("rank must be non-negative")
        if not self.thread_label:
            object.__setattr__(self, "thread_label", f"MPI_rank_{self.rank}")
        if super_of(self.thread_kind) is not SuperClass.AGENT:
            raise ConstraintError("thread_kind must be an Agent sub-class")


@dataclass(frozen=True)
class TrackingConfig:
    """Which sub-classes to record, duration switch, flush policy."""

    enabled: frozenset[SubClass] = ALL_SUBCLASSES
    track_durations: bool = False
    flush_every_ms: int | None = None  # None = flush only at session end
    output_dir: Path = Path(".")

    def __post_init__(self):
        if self.flush_every_ms is not None and self.flush_every_ms <= 0:
            raise ConstraintError("periodic flush interval must be > 0 ms")
        # an activity must attach to its agent chain
        if any(super_of(s) is SuperClass.ACTIVITY for s in self.enabled):
            if SubClass.PROGRAM not in self.enabled:
                object.__setattr__(
                    self, "enabled", self.enabled | {SubClass.PROGRAM})

    def is_enabled(self, sub: SubClass) -> bool:
        return sub in self.enabled

    def without(self, *subs: SubClass) -> "TrackingConfig":
        return TrackingConfig(self.enabled - set(subs), self.track_durations,
                              self.flush_every_ms, self.output_dir)

    @classmethod
    def none_enabled(cls, output_dir: Path = Path(".")) -> "TrackingConfig":
        return cls(enabled=frozenset(), output_dir=output_dir)

    @classmethod
    def from_ini(cls, path: str | Path) -> "TrackingConfig":
        parser = configparser.ConfigParser()
        read = parser.read(os.fspath(path))
        if not read:
            raise ConstraintError(f"cannot read tracking config {path}")
        enabled = set(SubClass)
        if parser.has_section("classes"):
            for name, value in parser.items("classes"):
                sub = SubClass[name.upper()]
                if parser.getboolean("classes", name):
                    enabled.add(sub)
                else:
                    enabled.discard(sub)
        durations = False
        flush_every_ms = None
        output_dir = Path(".")
        if parser.has_section("tracking"):
            durations = parser.getboolean("tracking", "durations",
                                          fallback=False)
            flush = parser.get("tracking", "flush", fallback="atend")
            if flush.startswith("periodic:"):
                flush_every_ms = int(flush.split(":", 1)[1])
            elif flush != "atend":
                raise ConstraintError(f"unknown flush policy {flush!r}")
            output_dir = Path(parser.get("tracking", "output", fallback="."))
        return cls(frozenset(enabled), durations, flush_every_ms, output_dir)

    @classmethod
    def from_env(cls, default: "TrackingConfig | None" = None) -> "TrackingConfig":
        path = os.environ.get(CONFIG_ENV_VAR)
        if path:
            return cls.from_ini(path)
        return default if default is not None else cls()


@dataclass
class IoEvent:
    """One I/O operation observed by the facade."""

    api_name: str
    api_class: SubClass
    target_class: SubClass
    target_path: str
    duration_us: int | None = None
    seq_no: int | None = None


class _ObjectEntry:
    """Live data-object registry slot with its per-object lock."""

    __slots__ = ("path", "lock", "refs")

    def __init__(self, path: str):
        self.path = path
        self.lock = threading.Lock()
        self.refs = 0


def monotonic_us() -> int:
    return time.monotonic_ns() // 1000


class Session:
    """One process's (or worker's) tracking session."""

    def __init__(self, ctx: AgentContext, cfg: TrackingConfig,
                 clock: Callable[[], int] = monotonic_us):
        self.ctx = ctx
        self.cfg = cfg
        self.clock = clock
        self.graph = ProvGraph()
        # per-process discriminator: program+rank identify one session's
        # activity instances across the merged workflow graph
        self._instance = stable_agent_hash(SubClass.PROGRAM, ctx.program)
        self.diagnostics = 0
        self.flush_count = 0
        self._seq = 0
        self._ended = False
        self._lock = threading.Lock()
        self._registry_lock = threading.Lock()
        self._open_objects: dict[str, _ObjectEntry] = {}
        self._attributed: set[tuple[Guid, Guid]] = set()
        self._program_guid: Guid | None = None
        self._last_flush_us = 0
        self._flusher: threading.Thread | None = None
        self._stop_flusher = threading.Event()

    # -- lifecycle --------------------------------------------------

    def _seed_agents(self) -> None:
        cfg, ctx = self.cfg, self.ctx
        user = thread = program = None
        if cfg.is_enabled(SubClass.USER):
            user = make_node(SubClass.USER, ctx.user)
            self.graph.add_node(user)
        if cfg.is_enabled(ctx.thread_kind):
            thread = make_node(ctx.thread_kind, ctx.thread_label)
            self.graph.add_node(thread)
        if cfg.is_enabled(SubClass.PROGRAM):
            program = make_node(SubClass.PROGRAM, ctx.program)
            self.graph.add_node(program)
            self._program_guid = program.guid
        if program is not None and thread is not None:
            self.graph.add_triple(Triple(
                program.guid, Predicate.ACTED_ON_BEHALF_OF, thread.guid))
        if thread is not None and user is not None:
            self.graph.add_triple(Triple(
                thread.guid, Predicate.ACTED_ON_BEHALF_OF, user.guid))

    def _start_flusher(self) -> None:
        if self.cfg.flush_every_ms is None:
            return
        interval = self.cfg.flush_every_ms / 1000.0

        def loop() -> None:
            while not self._stop_flusher.wait(interval):
                try:
                    self.flush()
                except Exception:
                    with self._lock:
                        self.diagnostics += 1

        self._flusher = threading.Thread(target=loop, daemon=True,
                                         name="provio-flusher")
        self._flusher.start()

    @property
    def subgraph_path(self) -> Path:
        program = self.ctx.program.replace(os.sep, "_")
        return self.cfg.output_dir / f"prov_{program}_{self.ctx.rank}.ttl"

    @property
    def ended(self) -> bool:
        return self._ended

    def next_seq(self) -> int:
        with self._lock:
            self._seq += 1
            return self._seq

    # -- object registry (the live data-object list) ----------------

    def register_object(self, path: str) -> None:
        with self._registry_lock:
            entry = self._open_objects.get(path)
            if entry is None:
                entry = self._open_objects[path] = _ObjectEntry(path)
            entry.refs += 1

    def release_object(self, path: str) -> None:
        with self._registry_lock:
            entry = self._open_objects.get(path)
            if entry is None:
                return
            entry.refs -= 1
            if entry.refs <= 0:
                del self._open_objects[path]

    def open_object_count(self) -> int:
        with self._registry_lock:
            return len(self._open_objects)

    def _object_lock(self, path: str) -> threading.Lock:
        with self._registry_lock:
            entry = self._open_objects.get(path)
            if entry is None:
                entry = self._open_objects[path] = _ObjectEntry(path)
            return entry.lock

    # -- recording ---------------------------------------------------

    def record_io(self, ev: IoEvent) -> None:
        """Record one I/O event.  Never raises into the I/O path; a
        disabled api_class is a successful pass-through."""
        try:
            if self._ended or not self.cfg.is_enabled(ev.api_class):
                if self._ended:
                    self.diagnostics += 1
                return
            lock = self._object_lock(ev.target_path)
            with lock:
                with self._lock:
                    self._record_io_locked(ev)
            self._maybe_periodic_flush()
        except Exception:
            with self._lock:
                self.diagnostics += 1

    def _record_io_locked(self, ev: IoEvent) -> None:
        if ev.seq_no is None:
            self._seq += 1
            ev.seq_no = self._seq
        activity = ProvNode(
            mint_guid(ev.api_class, ev.api_name, rank=self.ctx.rank,
                      seq=ev.seq_no, instance=self._instance),
            ev.api_class, ev.api_name)
        self.graph.add_node(activity)
        if self._program_guid is not None:
            self.graph.add_triple(Triple(
                activity.guid, Predicate.WAS_ASSOCIATED_WITH,
                self._program_guid))
        if self.cfg.is_enabled(ev.target_class):
            entity = make_node(ev.target_class, ev.target_path)
            self.graph.add_node(entity)
            self.graph.add_triple(Triple(
                entity.guid, relation_for_io(ev.api_class), activity.guid))
            if self._program_guid is not None:
                pair = (entity.guid, self._program_guid)
                if pair not in self._attributed:
                    self.graph.add_triple(Triple(
                        entity.guid, Predicate.WAS_ATTRIBUTED_TO,
                        self._program_guid))
                    self._attributed.add(pair)
        if self.cfg.track_durations and ev.duration_us is not None:
            self.graph.add_triple(Triple(
                activity.guid, Predicate.ELAPSED, int(ev.duration_us)))

    def record_extensible(self, kind: SubClass, name: str,
                          payload: dict[str, Literal] | None = None,
                          links: list[tuple[Predicate, Guid]] | None = None,
                          ) -> Guid:
        """Record a workflow-specific fact node with literal properties
        and optional relation links; returns its GUID for later linking."""
        if super_of(kind) is not SuperClass.EXTENSIBLE:
            raise ConstraintError(f"{kind.value} is not an extensible sub-class")
        if self._ended or not self.cfg.is_enabled(kind):
            return UNTRACKED
        props: list[tuple[Predicate, Literal]] = []
        for key, value in (payload or {}).items():
            pred = _EXTENSIBLE_PROPERTIES.get(key)
            if pred is None:
                raise ConstraintError(
                    f"{key!r} is not a recordable property "
                    f"(expected one of {sorted(_EXTENSIBLE_PROPERTIES)})")
            props.append((pred, value))
        node = make_node(kind, name)
        with self._lock:
            self.graph.add_node(node)
            for pred, value in props:
                self.graph.add_triple(Triple(node.guid, pred, value))
            for pred, target in links or ():
                self.graph.add_triple(Triple(node.guid, pred, target))
        self._maybe_periodic_flush()
        return node.guid

    # -- flushing ----------------------------------------------------

    def _maybe_periodic_flush(self) -> None:
        if self.cfg.flush_every_ms is None:
            return
        now = self.clock()
        if now - self._last_flush_us >= self.cfg.flush_every_ms * 1000:
            self.flush()

    def flush(self) -> Path:
        """Serialize a consistent snapshot to the per-process file
        (atomic temp + rename).  The in-memory graph is retained."""
        with self._lock:
            text = serialize_turtle(self.graph)
            self._last_flush_us = self.clock()
            self.flush_count += 1
        path = self.subgraph_path
        fd, tmp = tempfile.mkstemp(dir=os.fspath(self.cfg.output_dir),
                                   suffix=".ttl.tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path

    def end(self) -> Path:
        """Stop the flusher, write the final file, drain open handles.
        The session is unusable afterwards; a second end is an error."""
        with self._lock:
            if self._ended:
                raise SessionError("session already ended")
            self._ended = True
        if self._flusher is not None:
            self._stop_flusher.set()
            self._flusher.join()
            self._flusher = None
        with self._registry_lock:
            self._open_objects.clear()
        return self.flush()


def begin_session(ctx: AgentContext, cfg: TrackingConfig,
                  clock: Callable[[], int] = monotonic_us) -> Session:
    """Create a session: verify the output directory, seed the agent
    chain, and start the periodic flusher when configured."""
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SessionError(f"cannot create output dir: {exc}") from exc
    if not os.access(cfg.output_dir, os.W_OK):
        raise SessionError(f"output dir not writable: {cfg.output_dir}")
    session = Session(ctx, cfg, clock)
    session._seed_agents()
    session._last_flush_us = clock()
    session._start_flusher()
    return session


def end_session(session: Session) -> Path:
    return session.end()
