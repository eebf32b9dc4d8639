"""Decoders for app-data formats: shared_prefs XML and SQLite database files."""

from caseforge.artifacts.classify import annotate_prefs, annotate_table, classify_value
from caseforge.artifacts.shared_prefs import parse_shared_prefs, render_shared_prefs
from caseforge.artifacts.sqlite_reader import find_table, sqlite_read

__all__ = [
    "annotate_prefs",
    "annotate_table",
    "classify_value",
    "find_table",
    "parse_shared_prefs",
    "render_shared_prefs",
    "sqlite_read",
]
