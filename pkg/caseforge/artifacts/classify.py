# caseforge/artifacts/classify.py
"""
Best-effort hints for cells and preference values that may be evidential:
timestamps and opaque tokens. Annotations never alter the value.
"""

import re
from typing import List, Optional

from caseforge.schemas.artifacts import Cell, CellAnnotation, PrefsDocument, PrefsType, SqliteTable

# 2001-01-01T00:00:00Z .. 2286-11-20T17:46:39Z
SECONDS_MIN = 978_307_200
SECONDS_MAX = 9_999_999_999
MILLIS_MIN = SECONDS_MIN * 1000
MILLIS_MAX = SECONDS_MAX * 1000 + 999

TOKEN_MIN_LENGTH = 40
_TOKEN_RE = re.compile(r"^[A-Za-z0-9+/=._\-]+$")
_DIGITS_RE = re.compile(r"^-?[0-9]+$")

TIMESTAMP_SECONDS = "timestamp? (seconds)"
TIMESTAMP_MILLIS = "timestamp? (millis)"
TOKEN = "token?"


def _classify_integer(value: int) -> Optional[str]:
    if SECONDS_MIN <= value <= SECONDS_MAX:
        return TIMESTAMP_SECONDS
    if MILLIS_MIN <= value <= MILLIS_MAX:
        return TIMESTAMP_MILLIS
    return None


def classify_value(cell: Cell) -> Optional[str]:
    """Annotation for one value, or None when nothing stands out."""
    if isinstance(cell, bool):
        return None
    if isinstance(cell, int):
        return _classify_integer(cell)
    if isinstance(cell, str):
        if _DIGITS_RE.match(cell):
            return _classify_integer(int(cell))
        if len(cell) >= TOKEN_MIN_LENGTH and _TOKEN_RE.match(cell):
            return TOKEN
    return None


def annotate_table(table: SqliteTable) -> List[CellAnnotation]:
    annotations = []
    for rowid, row in zip(table.rowids, table.rows):
        for column, cell in zip(table.columns, row):
            note = classify_value(cell)
            if note:
                annotations.append(CellAnnotation(column=column, rowid=rowid, annotation=note))
    return annotations


def annotate_prefs(document: PrefsDocument) -> List[CellAnnotation]:
    annotations = []
    for key, value in document.entries:
        if value.type in (PrefsType.STRING_SET, PrefsType.BOOLEAN, PrefsType.FLOAT):
            continue
        note = classify_value(value.value)
        if note:
            annotations.append(CellAnnotation(column="value", key=key, annotation=note))
    return annotations
