# tests/builders.py
"""
Test data builders: HPROF dumps, random object graphs with brute-force
oracles, snapshot archives, SQLite fixture files and simulator profiles.
"""

import hashlib
import random
import struct
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from sqlalchemy import text

from caseforge.db.session import create_sqlite_engine
from caseforge.evidence.archive import build_archive, serialize_archive
from caseforge.heapkit.sizes import shallow_size
from caseforge.repositories.image_repository import ImageRepository
from caseforge.schemas.acquisition import AcquiredImage
from caseforge.schemas.evidence import FsEntry, SnapshotArchive
from caseforge.schemas.heap import BasicType, HeapClass, HeapGraph, ObjectArray, PrimitiveArray

# ============================================================
# HPROF WRITER
# ============================================================

HPROF_MAGIC = b"JAVA PROFILE 1.0.1\x00"
STRING_ID_BASE = 0x100000
CLASS_ID_BASE = 0x10000

_FORMATS = {
    BasicType.OBJECT: ">I",
    BasicType.BOOLEAN: ">?",
    BasicType.CHAR: ">H",
    BasicType.FLOAT: ">f",
    BasicType.DOUBLE: ">d",
    BasicType.BYTE: ">b",
    BasicType.SHORT: ">h",
    BasicType.INT: ">i",
    BasicType.LONG: ">q",
}


def encode_value(basic_type: BasicType, value) -> bytes:
    return struct.pack(_FORMATS[basic_type], value or 0)


class HprofWriter:
    """Low-level writer: one call per record, heap sub-records collected into one HEAP DUMP."""

    def __init__(self, timestamp: int = 0, id_size: int = 4, magic: bytes = HPROF_MAGIC):
        self.header = magic + struct.pack(">IQ", id_size, timestamp)
        self.records: List[bytes] = []
        self.heap: List[bytes] = []
        self._string_ids: Dict[str, int] = {}
        self._serial = 0

    def record(self, tag: int, body: bytes) -> None:
        self.records.append(struct.pack(">BII", tag, 0, len(body)) + body)

    def string(self, value: str) -> int:
        if value not in self._string_ids:
            string_id = STRING_ID_BASE + len(self._string_ids)
            self._string_ids[value] = string_id
            self.record(0x01, struct.pack(">I", string_id) + value.encode("utf-8"))
        return self._string_ids[value]

    def load_class(self, class_id: int, name: str) -> None:
        self._serial += 1
        self.record(0x02, struct.pack(">IIII", self._serial, class_id, 0, self.string(name)))

    def class_dump(
            self,
            class_id: int,
            super_id: int = 0,
            instance_size: int = 0,
            fields: Sequence[Tuple[str, BasicType]] = (),
            statics: Sequence[Tuple[str, BasicType, object]] = (),
    ) -> None:
        body = struct.pack(">BIII", 0x20, class_id, 0, super_id) + bytes(4 * 5)
        body += struct.pack(">I", instance_size)
        body += struct.pack(">H", 0)
        body += struct.pack(">H", len(statics))
        for name, basic_type, value in statics:
            body += struct.pack(">IB", self.string(name), basic_type) + encode_value(basic_type, value)
        body += struct.pack(">H", len(fields))
        for name, basic_type in fields:
            body += struct.pack(">IB", self.string(name), basic_type)
        self.heap.append(body)

    def instance(self, object_id: int, class_id: int, values: Sequence[Tuple[BasicType, object]]) -> None:
        raw = b"".join(encode_value(t, v) for t, v in values)
        self.heap.append(struct.pack(">BIIII", 0x21, object_id, 0, class_id, len(raw)) + raw)

    def object_array(self, object_id: int, class_id: int, elements: Sequence[int]) -> None:
        body = struct.pack(">BIII", 0x22, object_id, 0, len(elements)) + struct.pack(">I", class_id)
        self.heap.append(body + struct.pack(f">{len(elements)}I", *elements))

    def primitive_array(self, object_id: int, element_type: BasicType, data: bytes, count: Optional[int] = None) -> None:
        if count is None:
            count = len(data) // element_type.width
        self.heap.append(struct.pack(">BIIIB", 0x23, object_id, 0, count, element_type) + data)

    def root(self, object_id: int) -> None:
        self.heap.append(struct.pack(">BI", 0xFF, object_id))

    def sub_record(self, raw: bytes) -> None:
        self.heap.append(raw)

    def build(self, segment: bool = False) -> bytes:
        heap_tag = 0x1C if segment else 0x0C
        body = b"".join(self.heap)
        dump = struct.pack(">BII", heap_tag, 0, len(body)) + body
        end = struct.pack(">BII", 0x2C, 0, 0)
        return self.header + b"".join(self.records) + dump + end


class HeapBuilder:
    """
    Java-level heap builder on top of HprofWriter.

    Classes are declared by name; instance values are given by field name and
    laid out subclass-first, as the runtime does.
    """

    OBJECT = "java.lang.Object"
    STRING = "java.lang.String"

    def __init__(self, timestamp: int = 0):
        self.writer = HprofWriter(timestamp)
        self.class_ids: Dict[str, int] = {}
        self.layouts: Dict[str, List[Tuple[str, BasicType]]] = {}
        self.instance_sizes: Dict[str, int] = {}
        self._next_object = 1
        self.define_class(self.OBJECT)

    def define_class(
            self,
            name: str,
            fields: Sequence[Tuple[str, BasicType]] = (),
            superclass: Optional[str] = None,
            instance_size: Optional[int] = None,
    ) -> int:
        if superclass is None and name != self.OBJECT:
            superclass = self.OBJECT
        class_id = CLASS_ID_BASE + len(self.class_ids)
        layout = list(fields) + (self.layouts[superclass] if superclass else [])
        size = instance_size if instance_size is not None else sum(t.width for _, t in layout)
        self.class_ids[name] = class_id
        self.layouts[name] = layout
        self.instance_sizes[name] = size
        self.writer.load_class(class_id, name.replace(".", "/"))
        self.writer.class_dump(
            class_id, self.class_ids[superclass] if superclass else 0, size, list(fields),
        )
        return class_id

    def _allocate(self, root: bool) -> int:
        object_id = self._next_object
        self._next_object += 1
        if root:
            self.writer.root(object_id)
        return object_id

    def new_instance(self, class_name: str, root: bool = False, **values) -> int:
        object_id = self._allocate(root)
        layout = self.layouts[class_name]
        self.writer.instance(
            object_id, self.class_ids[class_name], [(t, values.get(name)) for name, t in layout],
        )
        return object_id

    def new_string(self, value: str, root: bool = False) -> int:
        if self.STRING not in self.class_ids:
            self.define_class(self.STRING, [("value", BasicType.OBJECT), ("count", BasicType.INT)])
        chars = self.new_primitive_array(BasicType.CHAR, value.encode("utf-16-be"))
        return self.new_instance(self.STRING, root=root, value=chars, count=len(value))

    def new_object_array(self, elements: Sequence[int], class_name: str = "java.lang.Object[]", root: bool = False) -> int:
        if class_name not in self.class_ids:
            self.define_class(class_name)
        object_id = self._allocate(root)
        self.writer.object_array(object_id, self.class_ids[class_name], elements)
        return object_id

    def new_primitive_array(self, element_type: BasicType, data: bytes, root: bool = False) -> int:
        object_id = self._allocate(root)
        self.writer.primitive_array(object_id, element_type, data)
        return object_id

    def root(self, object_id: int) -> None:
        self.writer.root(object_id)

    def build(self) -> bytes:
        return self.writer.build()


# ============================================================
# RANDOM OBJECT GRAPHS AND BRUTE-FORCE ORACLES
# ============================================================

RANDOM_ARRAY_CLASS = 900_000


def random_heap_graph(rng: random.Random, max_nodes: int = 200) -> HeapGraph:
    """
    Object arrays as nodes (their elements are the edges) plus some
    primitive-array leaves; a few roots, some objects left unreachable.
    """
    count = rng.randint(1, max_nodes)
    ids = list(range(1, count + 1))
    obj_arrays, prim_arrays = {}, {}
    for object_id in ids:
        if rng.random() < 0.2:
            length = rng.randint(0, 8)
            prim_arrays[object_id] = PrimitiveArray(
                id=object_id, element_type=BasicType.INT, count=length, data=bytes(4 * length),
            )
            continue
        degree = rng.choice((0, 1, 1, 2, 2, 3, 4))
        elements = tuple(rng.choice(ids) if rng.random() > 0.1 else 0 for _ in range(degree))
        obj_arrays[object_id] = ObjectArray(id=object_id, class_id=RANDOM_ARRAY_CLASS, elements=elements)
    roots = sorted(rng.sample(ids, rng.randint(1, min(3, count))))
    return HeapGraph(
        classes={RANDOM_ARRAY_CLASS: HeapClass(id=RANDOM_ARRAY_CLASS, name="java.lang.Object[]")},
        obj_arrays=obj_arrays,
        prim_arrays=prim_arrays,
        roots=roots,
    )


def reachable(graph: HeapGraph, removed: Optional[int] = None) -> Set[int]:
    """Objects reachable from the roots when `removed` is taken out of the graph."""
    seen: Set[int] = set()
    stack = [root for root in graph.roots if root != removed]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        stack.extend(t for t in graph.references(node) if t != removed and t not in seen)
    return seen


def brute_force_dominators(graph: HeapGraph) -> Dict[int, int]:
    """
    idom by deletion: d dominates v when v is unreachable without d. The
    immediate dominator is the strict dominator with the most dominators.
    """
    live = reachable(graph)
    lost_without = {d: live - reachable(graph, d) - {d} for d in live}
    dominators = {v: {d for d in live if v in lost_without[d]} for v in live}
    return {
        v: max(doms, key=lambda d: len(dominators[d])) if doms else 0
        for v, doms in dominators.items()
    }


def deletion_retained_sizes(graph: HeapGraph) -> Dict[int, int]:
    """Retained size of v = shallow sizes of v and everything that becomes unreachable without v."""
    live = reachable(graph)
    return {
        v: sum(shallow_size(graph, o) for o in (live - reachable(graph, v)))
        for v in live
    }


# ============================================================
# SNAPSHOT ARCHIVES
# ============================================================

def make_archive(files: Dict[str, bytes], dirs: Iterable[str] = (), slack: bytes = b"") -> SnapshotArchive:
    entries = [FsEntry.directory(path) for path in dirs]
    entries += [FsEntry.file(path, data) for path, data in files.items()]
    return build_archive(entries, slack)


def make_image(files: Dict[str, bytes], dirs: Iterable[str] = (), slack: bytes = b"") -> bytes:
    return serialize_archive(make_archive(files, dirs, slack))


# ============================================================
# SQLITE FIXTURES
# ============================================================

def sqlite_fixture(path: Path, statements: Sequence[Tuple[str, object]]) -> bytes:
    """
    Build a database with 512-byte pages through SQLite itself and return
    the closed file's bytes. Each statement is (sql, params) where params is
    a dict, a list of dicts for executemany, or None.
    """
    engine = create_sqlite_engine(path)
    try:
        with engine.begin() as connection:
            for sql, params in statements:
                if params is None:
                    connection.execute(text(sql))
                else:
                    connection.execute(text(sql), params)
    finally:
        engine.dispose()
    return path.read_bytes()


def sqlite_dump(path: Path, table: str) -> List[tuple]:
    """Rows of `table` as SQLite reports them, in rowid order."""
    engine = create_sqlite_engine(path)
    try:
        with engine.connect() as connection:
            return [tuple(row) for row in connection.execute(text(f"SELECT * FROM {table} ORDER BY rowid"))]
    finally:
        engine.dispose()


# ============================================================
# SIMULATOR PROFILES
# ============================================================

PREFS_XML = (
    "<?xml version='1.0' encoding='utf-8' standalone='yes' ?>\n"
    "<map>\n"
    "    <string name=\"user\">alice</string>\n"
    "    <string name=\"acct\">[\"a\",\"b\"]</string>\n"
    "    <long name=\"last_sync\" value=\"1400000000\" />\n"
    "    <boolean name=\"synced\" value=\"true\" />\n"
    "</map>\n"
)

SLACK_TEXT = "residue of a deleted note: token=ya29.deleted"

FIXTURE_ACCOUNTS = [
    {
        "id": 1,
        "name": "u@x.com",
        "type": "com.dropbox.android",
        "password": "",
        "authtokens": [["oauth", "tokA"]],
        "extras": [["refresh", "rT"]],
    },
    {
        "id": 2,
        "name": "alice@example.com",
        "type": "com.example.appname",
        "password": "tok123",
        "authtokens": [],
        "extras": [["userId", "42"]],
    },
]


def _dir(path: str) -> dict:
    return {"path": path, "kind": "dir"}


def userdata_files() -> List[dict]:
    return [
        _dir("data"),
        _dir("data/app"),
        {"path": "data/app/com.example.appname-1.apk", "hex": "504b030414000000"},
        _dir("data/com.dropbox.android"),
        _dir("data/com.dropbox.android/shared_prefs"),
        {"path": "data/com.dropbox.android/shared_prefs/com.dropbox.android_preferences.xml", "text": PREFS_XML},
        _dir("data/com.dropbox.android/databases"),
        _dir("data/com.example.appname"),
        _dir("data/com.example.appname/files"),
        {"path": "data/com.example.appname/files/notes.txt", "text": "meet at noon"},
        _dir("data/not-a-package"),
        _dir("data/media/0/Android/data/com.dropbox.android"),
        _dir("data/media/0/Android/data/com.removed.app"),
    ]


def profile_config(**overrides) -> dict:
    """
    Declarative profile of a locked device in fastboot mode with two stored
    accounts and a small app tree on userdata.
    """
    config = {
        "model": "SimPhone",
        "product": "simphone",
        "android_version": "4.4.2",
        "boot_state": "FastbootMode",
        "bootloader": "Locked",
        "partitions": {
            "system": {"files": [_dir("system/app"), {"path": "system/app/Phone.apk", "hex": "504b0304"}]},
            "userdata": {"files": userdata_files(), "slack_text": SLACK_TEXT},
            "cache": {"size": 0},
            "boot": {"fill_hex": "414e44524f494421", "size": 2048},
            "recovery": {"fill_hex": "5a", "size": 1024},
        },
        "accounts": FIXTURE_ACCOUNTS,
        "signature_check_bypassed": True,
    }
    config.update(overrides)
    return config


def live_profile_config(**overrides) -> dict:
    """Unlocked device already running the live OS, ready for collection."""
    return profile_config(boot_state="LiveOs", bootloader="Unlocked", **overrides)


# ============================================================
# CASE DIRECTORY CONTENT
# ============================================================

def store_image(case_dir: Path, partition: str, data: bytes, device_data: Optional[bytes] = None) -> AcquiredImage:
    """Write <partition>.img and its metadata as a collection run would."""
    images = ImageRepository(case_dir)
    Path(case_dir).mkdir(parents=True, exist_ok=True)
    with images.create(partition) as handle:
        handle.write(data)
    device_data = data if device_data is None else device_data
    local_md5, local_sha1 = hashlib.md5(data).hexdigest(), hashlib.sha1(data).hexdigest()
    device_md5, device_sha1 = hashlib.md5(device_data).hexdigest(), hashlib.sha1(device_data).hexdigest()
    return images.save_meta(AcquiredImage(
        partition=partition,
        bytes_path=images.image_path(partition),
        size=len(data),
        local_md5=local_md5,
        local_sha1=local_sha1,
        device_md5=device_md5,
        device_sha1=device_sha1,
        verified=(local_md5, local_sha1) == (device_md5, device_sha1),
        device_path=f"/dev/block/platform/msm_sdcc.1/by-name/{partition}",
        acquired_at=1_400_000_000,
    ))
