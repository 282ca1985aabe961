"""Instrumented I/O surface: sandboxed POSIX-style file operations plus
container-object operations, each homomorphically reporting one event to
the bound tracker session.

Every operation works identically with no session bound (tracking is
observation-only); with a session, the emitted activity class follows
the fixed API-to-class table and the event target is the canonical path
of the touched data object.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .container import OBJECT_KINDS, Container
from .model import ConstraintError, ProvioError, SubClass
from .tracker import IoEvent, Session

READ = "r"
WRITE = "w"
READ_WRITE = "rw"

_CREATE_API = {
    SubClass.GROUP: "H5Gcreate",
    SubClass.DATASET: "H5Dcreate2",
    SubClass.ATTRIBUTE: "H5Acreate",
    SubClass.DATATYPE: "H5Tcreate",
    SubClass.LINK: "H5Lcreate",
}
_KIND_LETTER = {
    SubClass.GROUP: "G",
    SubClass.DATASET: "D",
    SubClass.ATTRIBUTE: "A",
    SubClass.DATATYPE: "T",
    SubClass.LINK: "L",
}


class FacadeError(ProvioError):
    """Path escape, mode mismatch, or handle misuse."""


@dataclass
class FileHandle:
    """Open POSIX-style file within the sandbox."""

    id: int
    path: str  # canonical sandbox-relative path
    entity_path: str  # alias-resolved identity (stable across renames)
    mode: str
    _fd: int = field(repr=False, default=-1)
    closed: bool = False


@dataclass
class ContainerObjectHandle:
    """Open object inside a container file."""

    id: int
    container: Container = field(repr=False)
    container_path: str  # canonical sandbox-relative host file path
    object_path: str
    kind: SubClass
    closed: bool = False


class IoFacade:
    """All operations confined to ``sandbox``; provenance reported to
    ``session`` when one is bound."""

    def __init__(self, sandbox: str | Path, session: Session | None = None):
        self.sandbox = Path(sandbox).resolve()
        self.sandbox.mkdir(parents=True, exist_ok=True)
        self.session = session
        self._aliases: dict[str, str] = {}  # renamed path -> entity identity
        self._next_id = 0
        self._id_lock = threading.Lock()

    # -- path handling ------------------------------------------------

    def canonical(self, path: str | Path) -> str:
        p = PurePosixPath(str(path).replace(os.sep, "/"))
        if p.is_absolute():
            try:
                p = p.relative_to(PurePosixPath(self.sandbox.as_posix()))
            except ValueError:
                raise FacadeError(f"path escapes the sandbox: {path}") from None
        parts = [part for part in p.parts if part not in (".",)]
        if ".." in parts:
            raise FacadeError(f"path escapes the sandbox: {path}")
        if not parts:
            raise FacadeError("empty path")
        return "/".join(parts)

    def real_path(self, path: str | Path) -> Path:
        return self.sandbox / self.canonical(path)

    def _entity_path(self, canonical: str) -> str:
        seen = set()
        while canonical in self._aliases and canonical not in seen:
            seen.add(canonical)
            canonical = self._aliases[canonical]
        return canonical

    def _alloc_id(self) -> int:
        with self._id_lock:
            self._next_id += 1
            return self._next_id

    # -- event plumbing -------------------------------------------------

    def _clock(self) -> int | None:
        s = self.session
        if s is not None and s.cfg.track_durations:
            return s.clock()
        return None

    def _emit(self, api_name: str, api_class: SubClass,
              target_class: SubClass, target_path: str,
              started: int | None) -> None:
        s = self.session
        if s is None:
            return
        duration = None
        if started is not None:
            duration = max(0, s.clock() - started)
        s.record_io(IoEvent(api_name, api_class, target_class, target_path,
                            duration_us=duration))

    # -- POSIX-style operations ----------------------------------------

    def mkdir(self, path: str | Path) -> str:
        canonical = self.canonical(path)
        started = self._clock()
        self.real_path(canonical).mkdir(parents=True, exist_ok=True)
        self._emit("posix_mkdir", SubClass.CREATE, SubClass.DIRECTORY,
                   self._entity_path(canonical), started)
        return canonical

    def open(self, path: str | Path, create: bool = False,
             mode: str = READ) -> FileHandle:
        if mode not in (READ, WRITE, READ_WRITE):
            raise FacadeError(f"bad mode {mode!r}")
        canonical = self.canonical(path)
        real = self.sandbox / canonical
        started = self._clock()
        if create:
            flags = os.O_CREAT | os.O_TRUNC | os.O_RDWR
        else:
            if not real.exists():
                raise FacadeError(f"no such file: {canonical}")
            flags = {READ: os.O_RDONLY, WRITE: os.O_WRONLY,
                     READ_WRITE: os.O_RDWR}[mode]
        try:
            fd = os.open(real, flags, 0o644)
        except OSError as exc:
            raise FacadeError(f"cannot open {canonical}: {exc}") from exc
        entity = self._entity_path(canonical)
        handle = FileHandle(self._alloc_id(), canonical, entity, mode, fd)
        if self.session is not None:
            self.session.register_object(entity)
        self._emit("posix_open", SubClass.CREATE if create else SubClass.OPEN,
                   SubClass.FILE, entity, started)
        return handle

    def _check_handle(self, h: FileHandle, need: str) -> None:
        if h.closed:
            raise FacadeError(f"handle for {h.path} is closed")
        if need == READ and h.mode == WRITE:
            raise FacadeError(f"{h.path} is write-only")
        if need == WRITE and h.mode == READ:
            raise FacadeError(f"{h.path} is read-only")

    def read(self, h: FileHandle, size: int = -1) -> bytes:
        self._check_handle(h, READ)
        started = self._clock()
        if size < 0:
            chunks = []
            while True:
                chunk = os.read(h._fd, 1 << 20)
                if not chunk:
                    break
                chunks.append(chunk)
            data = b"".join(chunks)
        else:
            data = os.read(h._fd, size)
        self._emit("posix_read", SubClass.READ, SubClass.FILE,
                   h.entity_path, started)
        return data

    def write(self, h: FileHandle, data: bytes) -> int:
        self._check_handle(h, WRITE)
        started = self._clock()
        count = os.write(h._fd, data)
        self._emit("posix_write", SubClass.WRITE, SubClass.FILE,
                   h.entity_path, started)
        return count

    def fsync(self, h: FileHandle) -> None:
        if h.closed:
            raise FacadeError(f"handle for {h.path} is closed")
        started = self._clock()
        os.fsync(h._fd)
        self._emit("posix_fsync", SubClass.FSYNC, SubClass.FILE,
                   h.entity_path, started)

    def rename(self, old: str | Path, new: str | Path) -> None:
        old_c = self.canonical(old)
        new_c = self.canonical(new)
        old_real, new_real = self.sandbox / old_c, self.sandbox / new_c
        if not old_real.exists():
            raise FacadeError(f"no such file: {old_c}")
        if new_real.exists():
            raise FacadeError(f"destination exists: {new_c}")
        started = self._clock()
        os.rename(old_real, new_real)
        entity = self._entity_path(old_c)
        # the entity keeps its identity; the new name binds to it
        self._aliases[new_c] = entity
        self._aliases.pop(old_c, None)
        self._emit("posix_rename", SubClass.RENAME, SubClass.FILE,
                   entity, started)

    def close(self, h: FileHandle) -> None:
        if h.closed:
            return
        os.close(h._fd)
        h.closed = True
        if self.session is not None:
            self.session.release_object(h.entity_path)

    # -- container operations --------------------------------------------

    def create_container(self, path: str | Path) -> Container:
        """Create the host file of a new container.  Uninstrumented:
        container acquisition is not an I/O API in the activity table."""
        return Container.create(self.real_path(path))

    def open_container(self, path: str | Path) -> Container:
        return Container.open(self.real_path(path))

    def container_create(self, c: Container, kind: SubClass,
                         object_path: str, payload: bytes = b"",
                         ) -> ContainerObjectHandle:
        if kind not in OBJECT_KINDS:
            raise ConstraintError(f"{kind.value} is not a container object kind")
        started = self._clock()
        path = c.create_object(kind, object_path, payload)
        handle = self._object_handle(c, kind, path)
        self._emit(_CREATE_API[kind], SubClass.CREATE, kind, path, started)
        return handle

    def container_open(self, c: Container, kind: SubClass,
                       object_path: str) -> ContainerObjectHandle:
        started = self._clock()
        path = c.open_object(kind, object_path)
        handle = self._object_handle(c, kind, path)
        self._emit(f"H5{_KIND_LETTER[kind]}open", SubClass.OPEN, kind, path,
                   started)
        return handle

    def _object_handle(self, c: Container, kind: SubClass,
                       path: str) -> ContainerObjectHandle:
        container_rel = self.canonical(c.path)
        handle = ContainerObjectHandle(self._alloc_id(), c, container_rel,
                                       path, kind)
        if self.session is not None:
            self.session.register_object(path)
        return handle

    def _check_object(self, h: ContainerObjectHandle) -> None:
        if h.closed:
            raise FacadeError(f"handle for {h.object_path} is closed")

    def container_read(self, h: ContainerObjectHandle) -> bytes:
        self._check_object(h)
        started = self._clock()
        data = h.container.read_object(h.object_path)
        self._emit(f"H5{_KIND_LETTER[h.kind]}read", SubClass.READ, h.kind,
                   h.object_path, started)
        return data

    def container_write(self, h: ContainerObjectHandle, payload: bytes,
                        append: bool = False) -> int:
        self._check_object(h)
        started = self._clock()
        count = h.container.write_object(h.object_path, payload, append=append)
        self._emit(f"H5{_KIND_LETTER[h.kind]}write", SubClass.WRITE, h.kind,
                   h.object_path, started)
        return count

    def container_flush(self, c: Container) -> None:
        started = self._clock()
        c.flush()
        self._emit("H5Fflush", SubClass.FSYNC, SubClass.FILE,
                   self._entity_path(self.canonical(c.path)), started)

    def container_close_object(self, h: ContainerObjectHandle) -> None:
        if h.closed:
            return
        h.closed = True
        if self.session is not None:
            self.session.release_object(h.object_path)
