"""Hierarchical single-file container: groups, datasets, attributes,
datatypes, and links inside one host file.

On-disk layout (all integers little-endian u64 unless noted):

    magic "PIOC" | version u8
    record*      ... kind u8 | flags u8 | prev_offset u64
                     path_len u64 | path utf-8 | payload_len u64 | payload
    index        entry_count u64, then per live object:
                     path_len u64 | path | latest_record_offset u64
    footer       index_offset u64 | record_count u64 | "PIOCIDX\\0"

Writes append a new version record and re-point the in-memory index; the
index+footer block is written on flush and dropped (file truncated back
to the data end) before the next append.  Re-opening trusts the footer
when its trailer tag checks out and otherwise rebuilds the index with a
forward scan, so a crash before flush loses no committed records.
"""

from __future__ import annotations

import io
import os
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

from .model import ConstraintError, ProvioError, SubClass

MAGIC = b"PIOC"
VERSION = 1
FOOTER_TAG = b"PIOCIDX\0"
_U64 = struct.Struct("<Q")
_HEADER_LEN = len(MAGIC) + 1
_FOOTER_LEN = 8 + 8 + len(FOOTER_TAG)

#: record flags
_FLAG_APPEND = 0x01

OBJECT_KINDS = (SubClass.GROUP, SubClass.DATASET, SubClass.ATTRIBUTE,
                SubClass.DATATYPE, SubClass.LINK)
_KIND_CODE = {k: i for i, k in enumerate(OBJECT_KINDS)}
_KIND_FROM_CODE = dict(enumerate(OBJECT_KINDS))


class ContainerError(ProvioError):
    """Malformed container file or object-level precondition failure."""


@dataclass(frozen=True)
class _IndexEntry:
    kind: SubClass
    offset: int  # latest record for this object


def _canonical_object_path(path: str) -> str:
    if not path.startswith("/"):
        raise ContainerError(f"object path must be rooted at '/': {path!r}")
    parts = [p for p in path.split("/") if p]
    if any(p in (".", "..") for p in parts):
        raise ContainerError(f"object path may not contain '.' or '..': {path!r}")
    return "/" + "/".join(parts)


def _parent_of(path: str) -> str:
    if path == "/":
        return ""
    head, _, _ = path.rpartition("/")
    return head or "/"


class Container:
    """One open container file.  Record appends are serialized by an
    internal writer lock; distinct containers are fully independent."""

    def __init__(self, path: str | Path, fh: io.BufferedRandom,
                 index: dict[str, _IndexEntry], data_end: int,
                 record_count: int):
        self.path = Path(path)
        self._fh = fh
        self._index = index
        self._data_end = data_end
        self._record_count = record_count
        self._lock = threading.RLock()
        self._dirty = False
        self._closed = False

    # -- lifecycle ---------------------------------------------------

    @classmethod
    def create(cls, path: str | Path) -> "Container":
        fh = open(path, "w+b")
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.flush()
        return cls(path, fh, {}, _HEADER_LEN, 0)

    @classmethod
    def open(cls, path: str | Path) -> "Container":
        fh = open(path, "r+b")
        header = fh.read(_HEADER_LEN)
        if header[:4] != MAGIC or len(header) < _HEADER_LEN:
            fh.close()
            raise ContainerError(f"{path}: not a container file")
        if header[4] != VERSION:
            fh.close()
            raise ContainerError(f"{path}: unsupported version {header[4]}")
        index, data_end, count = cls._load_index(fh)
        return cls(path, fh, index, data_end, count)

    @classmethod
    def _load_index(cls, fh) -> tuple[dict[str, _IndexEntry], int, int]:
        fh.seek(0, os.SEEK_END)
        size = fh.tell()
        if size >= _HEADER_LEN + _FOOTER_LEN:
            fh.seek(size - _FOOTER_LEN)
            footer = fh.read(_FOOTER_LEN)
            if footer.endswith(FOOTER_TAG):
                index_offset = _U64.unpack_from(footer, 0)[0]
                count = _U64.unpack_from(footer, 8)[0]
                if _HEADER_LEN <= index_offset <= size - _FOOTER_LEN:
                    try:
                        index = cls._read_index(fh, index_offset)
                        return index, index_offset, count
                    except ContainerError:
                        pass  # fall back to the scan
        return cls._scan_rebuild(fh, size)

    @classmethod
    def _read_index(cls, fh, index_offset: int) -> dict[str, _IndexEntry]:
        def read_exact(n: int) -> bytes:
            raw = fh.read(n)
            if len(raw) < n:
                raise ContainerError("truncated index")
            return raw

        fh.seek(index_offset)
        (count,) = _U64.unpack(read_exact(8))
        entries: list[tuple[str, int]] = []
        for _ in range(count):
            (path_len,) = _U64.unpack(read_exact(8))
            path = read_exact(path_len).decode("utf-8")
            (offset,) = _U64.unpack(read_exact(8))
            entries.append((path, offset))
        index: dict[str, _IndexEntry] = {}
        for path, offset in entries:
            fh.seek(offset)
            kind_code = fh.read(1)
            if not kind_code or kind_code[0] not in _KIND_FROM_CODE:
                raise ContainerError("index points at a bad record")
            index[path] = _IndexEntry(_KIND_FROM_CODE[kind_code[0]], offset)
        return index

    @classmethod
    def _scan_rebuild(cls, fh, size: int) -> tuple[dict[str, _IndexEntry], int, int]:
        """Forward scan over records, tolerating a truncated tail."""
        index: dict[str, _IndexEntry] = {}
        pos = _HEADER_LEN
        count = 0
        while pos < size:
            fh.seek(pos)
            fixed = fh.read(1 + 1 + 8 + 8)
            if len(fixed) < 18:
                break
            kind_code = fixed[0]
            if kind_code not in _KIND_FROM_CODE:
                break
            (path_len,) = _U64.unpack_from(fixed, 10)
            if path_len > size - pos:
                break
            path_raw = fh.read(path_len)
            if len(path_raw) < path_len:
                break
            len_raw = fh.read(8)
            if len(len_raw) < 8:
                break
            (payload_len,) = _U64.unpack(len_raw)
            record_end = pos + 18 + path_len + 8 + payload_len
            if record_end > size:
                break
            try:
                path = path_raw.decode("utf-8")
            except UnicodeDecodeError:
                break
            index[path] = _IndexEntry(_KIND_FROM_CODE[kind_code], pos)
            count += 1
            pos = record_end
        return index, pos, count

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            if self._dirty:
                self.flush()
            self._fh.close()
            self._closed = True

    def __enter__(self) -> "Container":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- record I/O ---------------------------------------------------

    def _append_record(self, kind: SubClass, path: str, payload: bytes,
                       append_flag: bool) -> int:
        prev = self._index.get(path)
        prev_offset = prev.offset if prev else 0
        offset = self._data_end
        self._fh.seek(offset)
        self._fh.truncate()  # drop any stale index block
        raw_path = path.encode("utf-8")
        self._fh.write(bytes([_KIND_CODE[kind],
                              _FLAG_APPEND if append_flag else 0]))
        self._fh.write(_U64.pack(prev_offset))
        self._fh.write(_U64.pack(len(raw_path)))
        self._fh.write(raw_path)
        self._fh.write(_U64.pack(len(payload)))
        self._fh.write(payload)
        self._fh.flush()
        self._data_end = self._fh.tell()
        self._record_count += 1
        self._index[path] = _IndexEntry(kind, offset)
        self._dirty = True
        return offset

    def _read_record(self, offset: int) -> tuple[SubClass, int, int, bytes]:
        self._fh.seek(offset)
        fixed = self._fh.read(18)
        kind = _KIND_FROM_CODE[fixed[0]]
        flags = fixed[1]
        (prev_offset,) = _U64.unpack_from(fixed, 2)
        (path_len,) = _U64.unpack_from(fixed, 10)
        self._fh.seek(offset + 18 + path_len)
        (payload_len,) = _U64.unpack(self._fh.read(8))
        payload = self._fh.read(payload_len)
        return kind, flags, prev_offset, payload

    # -- object operations --------------------------------------------

    def _check_open(self) -> None:
        if self._closed:
            raise ContainerError(f"{self.path}: container is closed")

    def exists(self, object_path: str) -> bool:
        return _canonical_object_path(object_path) in self._index

    def kind_of(self, object_path: str) -> SubClass | None:
        entry = self._index.get(_canonical_object_path(object_path))
        return entry.kind if entry else None

    def list_objects(self) -> list[tuple[str, SubClass]]:
        return sorted((p, e.kind) for p, e in self._index.items())

    def create_object(self, kind: SubClass, object_path: str,
                      payload: bytes = b"") -> str:
        if kind not in _KIND_CODE:
            raise ConstraintError(f"{kind.value} is not a container object kind")
        path = _canonical_object_path(object_path)
        with self._lock:
            self._check_open()
            if path in self._index:
                raise ContainerError(f"object already exists: {path}")
            parent = _parent_of(path)
            if parent and parent != "/":
                entry = self._index.get(parent)
                if entry is None:
                    raise ContainerError(f"missing parent group: {parent}")
                if entry.kind is SubClass.DATASET:
                    # datasets carry attributes only
                    if kind is not SubClass.ATTRIBUTE:
                        raise ContainerError(
                            f"parent {parent} is a Dataset; only attributes "
                            "may nest under it")
                elif entry.kind is not SubClass.GROUP:
                    raise ContainerError(
                        f"parent {parent} is a {entry.kind.value}, "
                        "cannot contain children")
            self._append_record(kind, path, payload, append_flag=False)
        return path

    def open_object(self, kind: SubClass, object_path: str) -> str:
        path = _canonical_object_path(object_path)
        with self._lock:
            self._check_open()
            entry = self._index.get(path)
            if entry is None:
                raise ContainerError(f"no such object: {path}")
            if entry.kind is not kind:
                raise ContainerError(
                    f"{path} is a {entry.kind.value}, not a {kind.value}")
        return path

    def write_object(self, object_path: str, payload: bytes,
                     append: bool = False) -> int:
        """Persist a new version record; returns bytes written."""
        path = _canonical_object_path(object_path)
        with self._lock:
            self._check_open()
            entry = self._index.get(path)
            if entry is None:
                raise ContainerError(f"no such object: {path}")
            self._append_record(entry.kind, path, payload, append_flag=append)
        return len(payload)

    def read_object(self, object_path: str) -> bytes:
        """Materialize the latest version: the most recent full record
        plus any append deltas written after it, in order."""
        path = _canonical_object_path(object_path)
        with self._lock:
            self._check_open()
            entry = self._index.get(path)
            if entry is None:
                raise ContainerError(f"no such object: {path}")
            chunks: list[bytes] = []
            offset = entry.offset
            while True:
                _kind, flags, prev_offset, payload = self._read_record(offset)
                chunks.append(payload)
                if not flags & _FLAG_APPEND or prev_offset == 0:
                    break
                offset = prev_offset
            return b"".join(reversed(chunks))

    def flush(self) -> None:
        """Write the trailing index and footer durably."""
        with self._lock:
            self._check_open()
            self._fh.seek(self._data_end)
            self._fh.truncate()
            self._fh.write(_U64.pack(len(self._index)))
            for path in sorted(self._index):
                raw = path.encode("utf-8")
                self._fh.write(_U64.pack(len(raw)))
                self._fh.write(raw)
                self._fh.write(_U64.pack(self._index[path].offset))
            self._fh.write(_U64.pack(self._data_end))
            self._fh.write(_U64.pack(self._record_count))
            self._fh.write(FOOTER_TAG)
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._dirty = False

    @property
    def record_count(self) -> int:
        return self._record_count
