# caseforge/evidence/archive.py
"""
Snapshot archive codec.

Layout: magic "AEVDSNP1", then entry records, then a 0x00 terminator byte,
then slack (unallocated bytes, possibly empty).

Entry record: kind(1) + path_len(u16 BE) + path + mtime(u64 BE)
              + [size(u64 BE) + data]   (files only)
"""

import logging
import struct
from typing import List, Tuple

from pydantic import ValidationError

from caseforge.core.errors import BadMagic, DuplicatePath, IsDirectory, NotFound, TruncatedEntry
from caseforge.schemas.evidence import EntryExtent, EntryKind, FsEntry, SnapshotArchive

logger = logging.getLogger(__name__)

MAGIC = b"AEVDSNP1"
END_OF_ENTRIES = 0x00

_U16 = struct.Struct(">H")
_U64 = struct.Struct(">Q")


def _encode_entry(entry: FsEntry) -> bytes:
    path = entry.path.encode("utf-8")
    parts = [bytes([entry.kind]), _U16.pack(len(path)), path, _U64.pack(entry.mtime)]
    if entry.kind is EntryKind.FILE:
        parts += [_U64.pack(len(entry.data)), entry.data]
    return b"".join(parts)


def serialize_archive(archive: SnapshotArchive) -> bytes:
    """Serialize in canonical (sorted) order."""
    body = b"".join(_encode_entry(entry) for entry in archive.entries)
    return MAGIC + body + bytes([END_OF_ENTRIES]) + archive.slack


def _take(image: bytes, offset: int, size: int, what: str) -> bytes:
    chunk = image[offset:offset + size]
    if len(chunk) < size:
        raise TruncatedEntry(f"{what} at offset {offset}: need {size} bytes, have {len(chunk)}")
    return chunk


def scan_archive(image: bytes) -> Tuple[List[FsEntry], bytes, List[EntryExtent], List[str]]:
    """
    Walk the records of a serialized archive.

    Returns:
        (entries in stored order, slack, data extents of files, warnings)

    Raises:
        BadMagic, TruncatedEntry, DuplicatePath
    """
    if image[:len(MAGIC)] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {bytes(image[:len(MAGIC)])!r}")

    entries: List[FsEntry] = []
    extents: List[EntryExtent] = []
    warnings: List[str] = []
    seen = set()
    previous_key = None
    offset = len(MAGIC)

    while True:
        kind_byte = _take(image, offset, 1, "entry kind")[0]
        offset += 1
        if kind_byte == END_OF_ENTRIES:
            break
        try:
            kind = EntryKind(kind_byte)
        except ValueError:
            raise TruncatedEntry(f"unknown entry kind 0x{kind_byte:02x} at offset {offset - 1}")

        (path_len,) = _U16.unpack(_take(image, offset, 2, "path length"))
        offset += 2
        raw_path = _take(image, offset, path_len, "path")
        offset += path_len
        try:
            path = raw_path.decode("utf-8")
        except UnicodeDecodeError:
            raise TruncatedEntry(f"path at offset {offset - path_len} is not UTF-8")
        (mtime,) = _U64.unpack(_take(image, offset, 8, "mtime"))
        offset += 8

        data = b""
        if kind is EntryKind.FILE:
            (size,) = _U64.unpack(_take(image, offset, 8, "size"))
            offset += 8
            data = _take(image, offset, size, f"data of '{path}'")
            extents.append(EntryExtent(path=path, start=offset, end=offset + size))
            offset += size

        if path in seen:
            raise DuplicatePath(f"path '{path}' appears twice")
        seen.add(path)

        key = raw_path
        if previous_key is not None and key < previous_key:
            message = f"NotCanonicalOrder: '{path}' follows a lexicographically larger path"
            logger.warning(message)
            warnings.append(message)
        previous_key = key

        try:
            entries.append(FsEntry(kind=kind, path=path, mtime=mtime, data=bytes(data)))
        except ValidationError as e:
            raise TruncatedEntry(f"invalid entry '{path}': {e.errors()[0]['msg']}")

    return entries, bytes(image[offset:]), extents, warnings


def parse_archive(image: bytes) -> SnapshotArchive:
    entries, slack, _, warnings = scan_archive(image)
    return SnapshotArchive(entries=entries, slack=slack, warnings=warnings)


def build_archive(entries: List[FsEntry], slack: bytes = b"") -> SnapshotArchive:
    try:
        return SnapshotArchive(entries=entries, slack=slack)
    except ValidationError as e:
        raise DuplicatePath(e.errors()[0]["msg"])


def find_entry(archive: SnapshotArchive, path: str) -> FsEntry:
    for entry in archive.entries:
        if entry.path == path:
            return entry
    raise NotFound(f"no entry '{path}' in archive")


def read_file(archive: SnapshotArchive, path: str) -> bytes:
    entry = find_entry(archive, path.strip("/"))
    if entry.is_dir:
        raise IsDirectory(f"'{path}' is a directory")
    return entry.data


def directories(archive: SnapshotArchive) -> set:
    """Every directory path, explicit or implied by a deeper entry."""
    found = set()
    for entry in archive.entries:
        parts = entry.path.split("/")
        limit = len(parts) if entry.is_dir else len(parts) - 1
        for depth in range(1, limit + 1):
            found.add("/".join(parts[:depth]))
    return found


def list_dir(archive: SnapshotArchive, prefix: str) -> List[str]:
    """Names of the immediate children (files and directories) under `prefix`."""
    prefix = prefix.strip("/") + "/"
    children = set()
    for entry in archive.entries:
        if entry.path.startswith(prefix):
            children.add(entry.path[len(prefix):].split("/", 1)[0])
    return sorted(children)
