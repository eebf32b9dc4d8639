# caseforge/evidence/__init__.py
from caseforge.evidence.archive import (
    build_archive,
    directories,
    find_entry,
    list_dir,
    parse_archive,
    read_file,
    scan_archive,
    serialize_archive,
)
from caseforge.evidence.search import identify_file_type, keyword_search

__all__ = [
    "build_archive",
    "directories",
    "find_entry",
    "identify_file_type",
    "keyword_search",
    "list_dir",
    "parse_archive",
    "read_file",
    "scan_archive",
    "serialize_archive",
]
