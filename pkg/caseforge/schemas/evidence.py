# caseforge/schemas/evidence.py
from enum import Enum, IntEnum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class EntryKind(IntEnum):
    DIR = 0x01
    FILE = 0x02


class FsEntry(BaseModel):
    """One record of a snapshot archive: a directory or a file with its bytes."""
    model_config = ConfigDict(frozen=True)

    kind: EntryKind
    path: str = Field(..., min_length=1)
    mtime: int = Field(0, ge=0, lt=2 ** 64)
    data: bytes = b""

    @model_validator(mode="after")
    def validate_entry(self) -> "FsEntry":
        if self.path.startswith("/"):
            raise ValueError(f"entry path '{self.path}' must not start with '/'")
        if self.kind is EntryKind.DIR and self.data:
            raise ValueError(f"directory '{self.path}' cannot carry data")
        return self

    @property
    def size(self) -> int:
        return len(self.data)

    @property
    def is_dir(self) -> bool:
        return self.kind is EntryKind.DIR

    @classmethod
    def file(cls, path: str, data: bytes, mtime: int = 0) -> "FsEntry":
        return cls(kind=EntryKind.FILE, path=path, data=data, mtime=mtime)

    @classmethod
    def directory(cls, path: str, mtime: int = 0) -> "FsEntry":
        return cls(kind=EntryKind.DIR, path=path, mtime=mtime)


class SnapshotArchive(BaseModel):
    """Parsed evidence image: ordered file tree plus trailing unallocated slack."""
    model_config = ConfigDict(frozen=True)

    entries: List[FsEntry] = Field(default_factory=list)
    slack: bytes = b""
    warnings: List[str] = Field(default_factory=list, exclude=True, repr=False)

    @field_validator("entries")
    @classmethod
    def validate_canonical(cls, entries: List[FsEntry]) -> List[FsEntry]:
        """Canonical form: unique paths sorted by their UTF-8 bytes."""
        ordered = sorted(entries, key=lambda e: e.path.encode("utf-8"))
        for previous, current in zip(ordered, ordered[1:]):
            if previous.path == current.path:
                raise ValueError(f"duplicate path '{current.path}'")
        return ordered

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SnapshotArchive):
            return NotImplemented
        return self.entries == other.entries and self.slack == other.slack

    def __hash__(self) -> int:
        return hash((tuple(e.path for e in self.entries), self.slack))


class EntryExtent(BaseModel):
    """Byte range [start, end) of a file's data inside the serialized image."""
    model_config = ConfigDict(frozen=True)

    path: str
    start: int
    end: int


class Region(str, Enum):
    ALLOCATED = "allocated"
    UNALLOCATED = "unallocated"


class SearchHit(BaseModel):
    model_config = ConfigDict(frozen=True)

    offset: int = Field(..., ge=0)
    pattern: str
    region: Region
    path: Optional[str] = None


class FileKind(str, Enum):
    SQLITE = "sqlite"
    HPROF = "hprof"
    XML = "xml"
    JPEG = "jpeg"
    ZIP = "zip/apk"
    UNKNOWN = "unknown"
