# caseforge/repositories/ledger_repository.py
"""
Ledger Repository

Append-only ledger.jsonl: one ChangeLedgerEntry per line, seq-ordered, each
entry hash-chained to the one before it.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from caseforge.core.errors import LedgerTampered
from caseforge.schemas.acquisition import ChangeLedgerEntry

logger = logging.getLogger(__name__)

LEDGER_FILE = "ledger.jsonl"
GENESIS_HASH = "0" * 64


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def entry_hash(entry: ChangeLedgerEntry) -> str:
    """sha256 over the canonical JSON of every field except record_hash."""
    return hashlib.sha256(canonical_json(entry.hashed_fields()).encode("utf-8")).hexdigest()


class LedgerRepository:
    """File-backed ledger inside one case directory."""

    def __init__(self, case_dir: Path):
        self.path = Path(case_dir) / LEDGER_FILE

    def exists(self) -> bool:
        return self.path.exists()

    def get_all(self) -> List[ChangeLedgerEntry]:
        if not self.path.exists():
            return []
        entries = []
        with self.path.open("r", encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    entries.append(ChangeLedgerEntry.model_validate_json(line))
                except ValidationError as e:
                    raise LedgerTampered(f"{self.path.name} line {number} is not a valid entry: {e.errors()[0]['msg']}")
        return entries

    def last(self) -> Optional[ChangeLedgerEntry]:
        entries = self.get_all()
        return entries[-1] if entries else None

    def append(self, entry: ChangeLedgerEntry) -> ChangeLedgerEntry:
        """Write one sealed entry at the end of the file."""
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(canonical_json(entry.model_dump()) + "\n")
        logger.info(
            f"Ledger #{entry.seq} {entry.operation} -> {entry.target}"
            + (" [mutating]" if entry.mutating else "")
        )
        return entry
