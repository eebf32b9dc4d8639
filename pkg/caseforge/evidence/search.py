# caseforge/evidence/search.py
"""
Raw keyword / signature search over image bytes, plus header-based file typing.

Hits inside a file's data extent are labeled allocated(path); everything else,
slack and structural archive bytes included, is unallocated.
"""

import bisect
import logging
from typing import List, Sequence, Tuple, Union

from caseforge.core.errors import BadMagic, EmptyPattern, TruncatedEntry
from caseforge.evidence.archive import scan_archive
from caseforge.schemas.evidence import EntryExtent, FileKind, Region, SearchHit
from caseforge.validators.evidence_validators import validate_pattern_bytes

logger = logging.getLogger(__name__)

Pattern = Union[str, bytes]

# Ordered: the first matching prefix wins.
MAGIC_TABLE: Tuple[Tuple[bytes, FileKind], ...] = (
    (b"SQLite format 3\x00", FileKind.SQLITE),
    (b"JAVA PROFILE ", FileKind.HPROF),
    (b"\xff\xd8\xff", FileKind.JPEG),
    (b"PK\x03\x04", FileKind.ZIP),
    (b"\xef\xbb\xbf<", FileKind.XML),
    (b"<?xml", FileKind.XML),
)


def identify_file_type(header: bytes) -> FileKind:
    for magic, kind in MAGIC_TABLE:
        if header.startswith(magic):
            return kind
    stripped = header.lstrip(b" \t\r\n")
    if stripped.startswith(b"<") and stripped[1:2].isalpha():
        return FileKind.XML
    return FileKind.UNKNOWN


def pattern_bytes(pattern: Pattern) -> bytes:
    """Text patterns are UTF-8; 'hex:...' patterns are byte signatures."""
    if isinstance(pattern, bytes):
        raw = pattern
    elif pattern.startswith("hex:"):
        try:
            raw = bytes.fromhex(pattern[4:])
        except ValueError as e:
            raise EmptyPattern(f"bad hex signature '{pattern}': {e}")
    else:
        raw = pattern.encode("utf-8")
    try:
        return validate_pattern_bytes(raw)
    except ValueError as e:
        raise EmptyPattern(str(e))


def pattern_label(pattern: Pattern) -> str:
    if isinstance(pattern, bytes):
        return "hex:" + pattern.hex()
    return pattern


def _extents_of(image: bytes) -> List[EntryExtent]:
    try:
        _, _, extents, _ = scan_archive(image)
    except (BadMagic, TruncatedEntry) as e:
        logger.info(f"Image does not parse as an archive ({e.detail}); every hit is unallocated")
        return []
    return sorted(extents, key=lambda x: x.start)


def find_all(haystack: bytes, needle: bytes) -> List[int]:
    """Every offset of needle, overlapping occurrences included."""
    offsets = []
    position = haystack.find(needle)
    while position != -1:
        offsets.append(position)
        position = haystack.find(needle, position + 1)
    return offsets


def _region_of(offset: int, length: int, extents: List[EntryExtent], starts: List[int]):
    index = bisect.bisect_right(starts, offset) - 1
    if index >= 0:
        extent = extents[index]
        if extent.start <= offset and offset + length <= extent.end:
            return Region.ALLOCATED, extent.path
    return Region.UNALLOCATED, None


def keyword_search(image: bytes, patterns: Sequence[Pattern]) -> List[SearchHit]:
    """
    Report every occurrence of every pattern, ordered by (offset, pattern order).

    A hit is allocated only when it lies entirely inside one file's data.
    """
    if not patterns:
        raise EmptyPattern("at least one pattern is required")
    needles = [(pattern_label(p), pattern_bytes(p)) for p in patterns]
    extents = _extents_of(image)
    starts = [extent.start for extent in extents]

    keyed = []
    for order, (label, needle) in enumerate(needles):
        for offset in find_all(image, needle):
            region, path = _region_of(offset, len(needle), extents, starts)
            keyed.append(((offset, order), SearchHit(offset=offset, pattern=label, region=region, path=path)))
    keyed.sort(key=lambda item: item[0])
    hits = [hit for _, hit in keyed]
    logger.info(f"Keyword search: {len(hits)} hits for {len(needles)} patterns over {len(image)} bytes")
    return hits
