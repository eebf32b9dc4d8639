# caseforge/services/accounts_service.py
"""
Service layer for AccountManager evidence.

This service handles:
- Joining the accounts / authtokens / extras tables of accounts.db
- Reconstructing accounts from CREDDUMP logcat lines
- Counting StaleDexCacheError packages into a de-odex worklist
"""

import logging
import re
from typing import Dict, Iterable, List, Optional, Tuple, Union
from urllib.parse import unquote

from caseforge.artifacts.sqlite_reader import find_table
from caseforge.core.errors import MissingAccountsTable, SchemaMismatch
from caseforge.device_sim.device import CREDDUMP_TAG, NULL_VALUE
from caseforge.device_sim.profiles import ACCOUNTS_DB_PATH
from caseforge.schemas.accounts import UNPARSED_PACKAGE, AccountRecord, AccountsExtraction, DeodexWorkItem, OrphanRow
from caseforge.schemas.artifacts import Cell, SqliteTable
from caseforge.schemas.device import LogLine

logger = logging.getLogger(__name__)

LOGCAT_PROVENANCE = "logcat"
STALE_DEX_TOKEN = "StaleDexCacheError"

_LOGCAT_RE = re.compile(r"^(\d+) ([^\s:]+): (.*)$")
_STALE_DEX_RE = re.compile(r"StaleDexCacheError:\s*\S*?/([A-Za-z0-9_.]+?)\.(?:jar|apk|odex)\b")
_DUMP_FIELDS = {
    "account": ("id", "name", "type", "password"),
    "authtoken": ("account", "type", "authtoken"),
    "extra": ("account", "key", "value"),
}

LogSource = Union[str, LogLine]


def _text(cell: Cell) -> Optional[str]:
    """Cell as text; blobs render as hex."""
    if cell is None:
        return None
    if isinstance(cell, bytes):
        return cell.hex()
    return str(cell)


def _as_id(cell: Cell) -> Optional[int]:
    if isinstance(cell, int) and not isinstance(cell, bool):
        return cell
    if isinstance(cell, str) and cell.lstrip("-").isdigit():
        return int(cell)
    return None


def _require(table: SqliteTable, columns: Iterable[str]) -> None:
    missing = [c for c in columns if c not in table.columns]
    if missing:
        raise SchemaMismatch(f"table '{table.name}' lacks column(s) {', '.join(missing)}")


def parse_logcat_line(line: LogSource) -> Optional[LogLine]:
    """Inverse of LogLine.render; None for lines in any other shape."""
    if isinstance(line, LogLine):
        return line
    match = _LOGCAT_RE.match(line.rstrip("\r\n"))
    if not match:
        return None
    return LogLine(timestamp=int(match.group(1)), tag=match.group(2), message=match.group(3))


def _decode_value(raw: str) -> Optional[str]:
    return None if raw == NULL_VALUE else unquote(raw)


def _dump_fields(message: str) -> Tuple[str, Dict[str, str]]:
    """'<kind> k=v k=v ...' with exactly the fields that kind requires."""
    kind, _, rest = message.partition(" ")
    if kind not in _DUMP_FIELDS:
        raise ValueError(f"unknown record kind '{kind}'")
    fields = {}
    for token in rest.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"token '{token}' is not key=value")
        fields[key] = value
    expected = _DUMP_FIELDS[kind]
    if set(fields) != set(expected):
        raise ValueError(f"{kind} line needs fields {', '.join(expected)}")
    return kind, fields


class AccountsService:
    """Service layer for accounts.db joins and logcat-derived evidence."""

    # ==================== accounts.db ====================

    @staticmethod
    def extract_accounts(tables: List[SqliteTable], provenance: str = ACCOUNTS_DB_PATH) -> AccountsExtraction:
        """
        Join accounts with authtokens (on accounts_id) and extras (on
        account_id), keeping rows that match no account as orphans.

        Args:
            tables: Every table read from accounts.db
            provenance: Where the tables came from

        Returns:
            AccountsExtraction: one record per accounts row, plus orphans

        Raises:
            MissingAccountsTable: no "accounts" table
            SchemaMismatch: a table lacks a column the join needs
        """
        accounts = find_table(tables, "accounts")
        if accounts is None:
            raise MissingAccountsTable(f"{provenance} has no 'accounts' table")
        id_column = "_id" if "_id" in accounts.columns else "id"
        _require(accounts, (id_column, "name", "type"))

        records: Dict[int, AccountRecord] = {}
        ordered: List[AccountRecord] = []
        warnings = []
        for row in accounts.records():
            account_id = _as_id(row[id_column])
            record = AccountRecord(
                id=account_id if account_id is not None else -1,
                name=_text(row["name"]) or "",
                type=_text(row["type"]) or "",
                password=_text(row.get("password")),
            )
            ordered.append(record)
            if account_id is None:
                warnings.append(f"accounts row with non-integer id {row[id_column]!r}")
            else:
                records[account_id] = record

        orphans = []
        authtokens = find_table(tables, "authtokens")
        if authtokens is not None:
            _require(authtokens, ("accounts_id", "type", "authtoken"))
            for row in authtokens.records():
                account_id = _as_id(row["accounts_id"])
                pair = (_text(row["type"]) or "", _text(row["authtoken"]))
                if account_id in records:
                    records[account_id].authtokens.append(pair)
                else:
                    orphans.append(OrphanRow(table="authtokens", account_id=account_id, key=pair[0], value=pair[1]))

        extras = find_table(tables, "extras")
        if extras is not None:
            link = "account_id" if "account_id" in extras.columns else "accounts_id"
            _require(extras, (link, "key", "value"))
            for row in extras.records():
                account_id = _as_id(row[link])
                pair = (_text(row["key"]) or "", _text(row["value"]))
                if account_id in records:
                    records[account_id].extras.append(pair)
                else:
                    orphans.append(OrphanRow(table="extras", account_id=account_id, key=pair[0], value=pair[1]))

        for orphan in orphans:
            logger.warning(f"Orphan {orphan.table} row for missing account {orphan.account_id}")
        logger.info(f"Extracted {len(ordered)} accounts, {len(orphans)} orphan rows from {provenance}")
        return AccountsExtraction(records=ordered, orphans=orphans, provenance=provenance, warnings=warnings)

    # ==================== LOGCAT ====================

    @staticmethod
    def parse_credential_dump(lines: Iterable[LogSource]) -> AccountsExtraction:
        """
        Rebuild accounts from CREDDUMP lines, ignoring all other log output.

        A line that cannot be read, or that refers to an account whose
        account line has not been seen, is recorded as MalformedDumpLine
        and skipped.
        """
        records: Dict[int, AccountRecord] = {}
        warnings = []

        def malformed(number: int, reason: str) -> None:
            message = f"MalformedDumpLine: line {number}: {reason}"
            logger.warning(message)
            warnings.append(message)

        for number, raw in enumerate(lines, start=1):
            line = parse_logcat_line(raw)
            if line is None or line.tag != CREDDUMP_TAG:
                continue
            try:
                kind, fields = _dump_fields(line.message)
                if kind == "account":
                    account_id = int(fields["id"])
                else:
                    account_id = int(fields["account"])
            except ValueError as e:
                malformed(number, str(e))
                continue

            if kind == "account":
                if account_id in records:
                    malformed(number, f"account {account_id} dumped twice")
                    continue
                records[account_id] = AccountRecord(
                    id=account_id,
                    name=_decode_value(fields["name"]) or "",
                    type=_decode_value(fields["type"]) or "",
                    password=_decode_value(fields["password"]),
                )
                continue

            record = records.get(account_id)
            if record is None:
                malformed(number, f"{kind} for account {account_id} before its account line")
                continue
            if kind == "authtoken":
                record.authtokens.append((_decode_value(fields["type"]) or "", _decode_value(fields["authtoken"])))
            else:
                record.extras.append((_decode_value(fields["key"]) or "", _decode_value(fields["value"])))

        logger.info(f"Credential dump: {len(records)} accounts, {len(warnings)} malformed lines")
        return AccountsExtraction(records=list(records.values()), provenance=LOGCAT_PROVENANCE, warnings=warnings)

    @staticmethod
    def build_deodex_worklist(lines: Iterable[LogSource]) -> List[DeodexWorkItem]:
        """
        One item per package named by a StaleDexCacheError line, ordered by
        first sighting. Lines carrying the error without a readable package
        are counted under <unparsed> and flagged.
        """
        items: Dict[str, DeodexWorkItem] = {}
        for raw in lines:
            text = raw.message if isinstance(raw, LogLine) else raw
            if STALE_DEX_TOKEN not in text:
                continue
            line = parse_logcat_line(raw)
            timestamp = line.timestamp if line else 0
            match = _STALE_DEX_RE.search(line.message if line else text)
            package = match.group(1) if match else UNPARSED_PACKAGE
            item = items.get(package)
            if item is None:
                items[package] = DeodexWorkItem(
                    package=package, first_seen=timestamp, flagged=package == UNPARSED_PACKAGE,
                )
            else:
                item.occurrences += 1
                item.first_seen = min(item.first_seen, timestamp)
        return sorted(items.values(), key=lambda item: item.first_seen)

    @staticmethod
    def render_worklist(items: List[DeodexWorkItem]) -> str:
        return "".join(f"{item.package}\n" for item in items)
