# caseforge/artifacts/sqlite_reader.py
"""
Read-only SQLite file-format reader.

Walks the sqlite_master b-tree to find tables, then each table's b-tree,
decoding records straight from the page bytes. Never opens the file through
SQLite itself, so evidence is read exactly as acquired.

Supported: rowid tables, interior and leaf table pages, varints, serial types
0-9 and blob/text. Indexes are skipped; WITHOUT ROWID tables and payloads that
spill to overflow pages raise explicit errors. The freelist is ignored.
"""

import logging
import re
import struct
from typing import Iterator, List, Optional, Set, Tuple

from caseforge.core.errors import (
    BadHeader,
    CorruptPage,
    OverflowPageUnsupported,
    UnsupportedEncoding,
    WithoutRowidUnsupported,
)
from caseforge.schemas.artifacts import Cell, SqliteTable

logger = logging.getLogger(__name__)

SQLITE_MAGIC = b"SQLite format 3\x00"
HEADER_SIZE = 100

LEAF_TABLE = 0x0D
INTERIOR_TABLE = 0x05
LEAF_INDEX = 0x0A
INTERIOR_INDEX = 0x02

ENCODING_UTF8 = 1

_CONSTRAINT_WORDS = {"PRIMARY", "UNIQUE", "CHECK", "FOREIGN", "CONSTRAINT"}
_TYPE_STOP_WORDS = {
    "CONSTRAINT", "PRIMARY", "NOT", "NULL", "UNIQUE", "CHECK", "DEFAULT",
    "COLLATE", "REFERENCES", "GENERATED", "AS",
}
_WITHOUT_ROWID_RE = re.compile(r"\)\s*WITHOUT\s+ROWID\s*;?\s*$", re.IGNORECASE)
_TABLE_PK_RE = re.compile(r"^PRIMARY\s+KEY\s*\((.*)\)", re.IGNORECASE | re.DOTALL)

_INT_SIZES = {1: 1, 2: 2, 3: 3, 4: 4, 5: 6, 6: 8}


# ==================== LOW-LEVEL DECODING ====================

def read_varint(data: bytes, offset: int) -> Tuple[int, int]:
    """Decode a SQLite varint; returns (value, bytes consumed)."""
    value = 0
    for i in range(9):
        if offset + i >= len(data):
            raise CorruptPage(f"varint runs past the end of its page at offset {offset}")
        byte = data[offset + i]
        if i == 8:
            return (value << 8) | byte, 9
        value = (value << 7) | (byte & 0x7F)
        if byte < 0x80:
            return value, i + 1
    raise CorruptPage("unreachable varint state")


def _signed(value: int, bits: int) -> int:
    return value - (1 << bits) if value & (1 << (bits - 1)) else value


def decode_record(payload: bytes) -> List[Cell]:
    """Decode one record (header of serial types, then the values)."""
    header_size, used = read_varint(payload, 0)
    if header_size > len(payload):
        raise CorruptPage(f"record header of {header_size} bytes exceeds payload of {len(payload)}")
    serial_types = []
    position = used
    while position < header_size:
        serial_type, used = read_varint(payload, position)
        serial_types.append(serial_type)
        position += used

    values: List[Cell] = []
    position = header_size
    for serial_type in serial_types:
        if serial_type in (10, 11):
            raise CorruptPage(f"reserved serial type {serial_type}")
        if serial_type == 0:
            values.append(None)
            continue
        if serial_type == 8:
            values.append(0)
            continue
        if serial_type == 9:
            values.append(1)
            continue
        if serial_type in _INT_SIZES:
            size = _INT_SIZES[serial_type]
        elif serial_type == 7:
            size = 8
        else:
            size = (serial_type - 12) // 2 if serial_type % 2 == 0 else (serial_type - 13) // 2
        raw = payload[position:position + size]
        if len(raw) < size:
            raise CorruptPage(f"record value of {size} bytes runs past the payload")
        position += size
        if serial_type in _INT_SIZES:
            values.append(_signed(int.from_bytes(raw, "big"), size * 8))
        elif serial_type == 7:
            values.append(struct.unpack(">d", raw)[0])
        elif serial_type % 2 == 0:
            values.append(bytes(raw))
        else:
            values.append(raw.decode("utf-8", errors="replace"))
    return values


# ==================== SCHEMA SQL ====================

def _split_top_level(body: str) -> List[str]:
    """Split a column-definition list on commas outside parentheses and quotes."""
    parts, depth, quote, current = [], 0, None, []
    closing = {'"': '"', "'": "'", "`": "`", "[": "]"}
    for char in body:
        if quote:
            current.append(char)
            if char == quote:
                quote = None
            continue
        if char in closing:
            quote = closing[char]
        elif char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        elif char == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
            continue
        current.append(char)
    if "".join(current).strip():
        parts.append("".join(current).strip())
    return parts


def _unquote(name: str) -> str:
    name = name.strip()
    if len(name) >= 2 and (name[0], name[-1]) in (('"', '"'), ("'", "'"), ("`", "`"), ("[", "]")):
        return name[1:-1]
    return name


def _leading_name(definition: str) -> Tuple[str, str]:
    """Split a column definition into (name, rest), honouring quoted names."""
    definition = definition.strip()
    closing = {'"': '"', "'": "'", "`": "`", "[": "]"}
    if definition and definition[0] in closing:
        end = definition.find(closing[definition[0]], 1)
        if end == -1:
            raise CorruptPage(f"unterminated quoted column name in '{definition}'")
        return definition[1:end], definition[end + 1:]
    pieces = definition.split(None, 1)
    return pieces[0], pieces[1] if len(pieces) > 1 else ""


def parse_columns(sql: str) -> Tuple[List[str], Optional[int]]:
    """
    Column names of a CREATE TABLE statement, plus the index of the column
    that aliases the rowid (an INTEGER PRIMARY KEY), if any.
    """
    start, end = sql.find("("), sql.rfind(")")
    if start == -1 or end <= start:
        raise CorruptPage(f"cannot read column list from '{sql}'")
    columns: List[str] = []
    types: List[str] = []
    alias: Optional[int] = None
    table_pk: Optional[List[str]] = None

    for definition in _split_top_level(sql[start + 1:end]):
        first_word = definition.split(None, 1)[0].upper() if definition.split() else ""
        if first_word in _CONSTRAINT_WORDS:
            match = _TABLE_PK_RE.match(definition)
            if match:
                table_pk = [_unquote(p.split()[0]) for p in _split_top_level(match.group(1))]
            continue
        name, rest = _leading_name(definition)
        type_words = []
        for word in rest.split():
            if word.upper().split("(")[0] in _TYPE_STOP_WORDS:
                break
            type_words.append(word)
        column_type = " ".join(type_words).upper()
        columns.append(name)
        types.append(column_type)
        upper_rest = " ".join(rest.upper().split())
        if column_type == "INTEGER" and "PRIMARY KEY" in upper_rest and "PRIMARY KEY DESC" not in upper_rest:
            alias = len(columns) - 1

    if alias is None and table_pk is not None and len(table_pk) == 1:
        lowered = [c.lower() for c in columns]
        if table_pk[0].lower() in lowered:
            index = lowered.index(table_pk[0].lower())
            if types[index] == "INTEGER":
                alias = index
    return columns, alias


# ==================== B-TREE WALK ====================

class _Database:

    def __init__(self, data: bytes):
        if len(data) < HEADER_SIZE or not data.startswith(SQLITE_MAGIC):
            raise BadHeader(f"not a SQLite 3 database (header {bytes(data[:16])!r})")
        (raw_page_size,) = struct.unpack(">H", data[16:18])
        self.page_size = 65536 if raw_page_size == 1 else raw_page_size
        if self.page_size < 512 or self.page_size & (self.page_size - 1):
            raise BadHeader(f"invalid page size {raw_page_size}")
        reserved = data[20]
        self.usable = self.page_size - reserved
        (encoding,) = struct.unpack(">I", data[56:60])
        if encoding not in (0, ENCODING_UTF8):
            raise UnsupportedEncoding(f"text encoding {encoding} (UTF-16) is not supported")
        self.data = data
        self.page_count = len(data) // self.page_size
        # Largest payload a table leaf cell keeps on its own page.
        self.max_local = self.usable - 35

    def page(self, number: int) -> Tuple[bytes, int]:
        """(page bytes, offset of its b-tree header)."""
        if not 1 <= number <= self.page_count:
            raise CorruptPage(f"page {number} outside 1..{self.page_count}")
        start = (number - 1) * self.page_size
        return self.data[start:start + self.page_size], HEADER_SIZE if number == 1 else 0

    def _cell_pointers(self, page: bytes, header: int, pointer_start: int, number: int) -> List[int]:
        (count,) = struct.unpack(">H", page[header + 3:header + 5])
        pointers = []
        for i in range(count):
            at = pointer_start + 2 * i
            if at + 2 > len(page):
                raise CorruptPage(f"page {number}: cell pointer array overruns the page")
            (pointer,) = struct.unpack(">H", page[at:at + 2])
            if not pointer_start <= pointer < self.usable:
                raise CorruptPage(f"page {number}: cell pointer {pointer} outside the page")
            pointers.append(pointer)
        return pointers

    def walk_table(self, root: int) -> Iterator[Tuple[int, bytes]]:
        """Yield (rowid, payload) for every cell of a table b-tree, in rowid order."""
        yield from self._walk(root, set())

    def _walk(self, number: int, visited: Set[int]) -> Iterator[Tuple[int, bytes]]:
        if number in visited:
            raise CorruptPage(f"b-tree cycle through page {number}")
        visited.add(number)
        page, header = self.page(number)
        page_type = page[header]

        if page_type == LEAF_TABLE:
            for pointer in self._cell_pointers(page, header, header + 8, number):
                payload_size, used = read_varint(page, pointer)
                rowid, used_rowid = read_varint(page, pointer + used)
                if payload_size > self.max_local:
                    raise OverflowPageUnsupported(
                        f"page {number}: cell payload of {payload_size} bytes spills to overflow pages"
                    )
                start = pointer + used + used_rowid
                payload = page[start:start + payload_size]
                if len(payload) < payload_size:
                    raise CorruptPage(f"page {number}: cell payload runs past the page")
                yield _signed(rowid, 64), payload
            return

        if page_type == INTERIOR_TABLE:
            (right_most,) = struct.unpack(">I", page[header + 8:header + 12])
            for pointer in self._cell_pointers(page, header, header + 12, number):
                (left_child,) = struct.unpack(">I", page[pointer:pointer + 4])
                yield from self._walk(left_child, visited)
            yield from self._walk(right_most, visited)
            return

        if page_type in (LEAF_INDEX, INTERIOR_INDEX):
            raise CorruptPage(f"page {number} is an index page inside a table b-tree")
        raise CorruptPage(f"page {number} has unknown b-tree page type 0x{page_type:02x}")


def _read_table(db: _Database, name: str, root: int, sql: str) -> SqliteTable:
    columns, alias = parse_columns(sql)
    rows, rowids = [], []
    for rowid, payload in db.walk_table(root):
        values = decode_record(payload)
        if len(values) > len(columns):
            raise CorruptPage(f"table {name}: record of {len(values)} values for {len(columns)} columns")
        # Rows written before an ALTER TABLE ADD COLUMN are short.
        values += [None] * (len(columns) - len(values))
        if alias is not None:
            values[alias] = rowid
        rows.append(tuple(values))
        rowids.append(rowid)
    return SqliteTable(name=name, columns=columns, rows=rows, rowids=rowids)


def sqlite_read(db: bytes) -> List[SqliteTable]:
    """
    Read every user table of a SQLite database file.

    Returns:
        Tables in sqlite_master order, rows in rowid order

    Raises:
        BadHeader, UnsupportedEncoding, OverflowPageUnsupported,
        WithoutRowidUnsupported, CorruptPage
    """
    database = _Database(db)
    if database.page_count == 0:
        raise BadHeader("database file is shorter than one page")

    tables = []
    for _, payload in database.walk_table(1):
        master = decode_record(payload)
        master += [None] * (5 - len(master))
        entry_type, name, _, root, sql = master[:5]
        if entry_type != "table" or not isinstance(name, str) or name.startswith("sqlite_"):
            continue
        if not isinstance(sql, str):
            raise CorruptPage(f"table {name} has no CREATE statement")
        if _WITHOUT_ROWID_RE.search(sql):
            raise WithoutRowidUnsupported(f"table {name} is a WITHOUT ROWID table")
        if not root:
            logger.warning(f"Table {name} has no b-tree (virtual table), skipped")
            continue
        tables.append(_read_table(database, name, root, sql))

    logger.debug(f"Read {len(tables)} tables from a {len(db)}-byte database")
    return tables


def find_table(tables: List[SqliteTable], name: str) -> Optional[SqliteTable]:
    for table in tables:
        if table.name == name:
            return table
    return None
