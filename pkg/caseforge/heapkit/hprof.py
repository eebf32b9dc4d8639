# caseforge/heapkit/hprof.py
"""
HPROF heap dump parser (identifier size 4).

Header: "JAVA PROFILE 1.0.1\\0", u32 identifier size, u64 timestamp (ms).
Top-level records: tag u8, u32 time offset, u32 body length, body.

    0x01 STRING          id, UTF-8 text
    0x02 LOAD CLASS      u32 serial, class id, u32 stack serial, name string id
    0x0C HEAP DUMP       heap sub-records
    0x1C HEAP DUMP SEGMENT, 0x2C HEAP DUMP END

Heap sub-records: 0xFF ROOT UNKNOWN, 0x20 CLASS DUMP, 0x21 INSTANCE DUMP,
0x22 OBJECT ARRAY DUMP, 0x23 PRIMITIVE ARRAY DUMP. Other top-level records
are skipped by their length; unknown sub-records are an error since their
length cannot be known.
"""

import logging
import struct
from typing import Dict, List, Tuple

from caseforge.core.errors import (
    BadHprofHeader,
    DanglingReference,
    HeapError,
    TruncatedRecord,
    UnknownHeapSubRecord,
    UnsupportedIdSize,
)
from caseforge.schemas.heap import (
    NULL_ID,
    BasicType,
    FieldValue,
    HeapClass,
    HeapGraph,
    HeapInstance,
    ObjectArray,
    PrimitiveArray,
)

logger = logging.getLogger(__name__)

HPROF_MAGIC = b"JAVA PROFILE 1.0.1\x00"
ID_SIZE = 4

TAG_STRING = 0x01
TAG_LOAD_CLASS = 0x02
TAG_HEAP_DUMP = 0x0C
TAG_HEAP_DUMP_SEGMENT = 0x1C
TAG_HEAP_DUMP_END = 0x2C

SUB_ROOT_UNKNOWN = 0xFF
SUB_CLASS_DUMP = 0x20
SUB_INSTANCE_DUMP = 0x21
SUB_OBJ_ARRAY_DUMP = 0x22
SUB_PRIM_ARRAY_DUMP = 0x23

_VALUE_FORMATS = {
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


class _Cursor:
    """Bounded reader; never reads past `end`."""

    def __init__(self, data: bytes, start: int, end: int, what: str):
        self.data = data
        self.pos = start
        self.end = end
        self.what = what

    def take(self, size: int) -> bytes:
        if self.pos + size > self.end:
            raise TruncatedRecord(f"{self.what}: need {size} bytes at offset {self.pos}, record ends at {self.end}")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def ident(self) -> int:
        return self.u32()

    def basic_type(self) -> BasicType:
        tag = self.u8()
        try:
            return BasicType(tag)
        except ValueError:
            raise TruncatedRecord(f"{self.what}: unknown basic type {tag} at offset {self.pos - 1}")

    def value(self, basic_type: BasicType) -> FieldValue:
        return struct.unpack(_VALUE_FORMATS[basic_type], self.take(basic_type.width))[0]

    @property
    def remaining(self) -> int:
        return self.end - self.pos


def normalize_class_name(name: str) -> str:
    return name.replace("/", ".")


class _Builder:
    """Collects raw records; resolves names and instance layouts at the end."""

    def __init__(self):
        self.strings: Dict[int, str] = {}
        self.class_names: Dict[int, int] = {}
        self.class_dumps: Dict[int, Tuple[int, int, List[Tuple[int, BasicType]]]] = {}
        self.raw_instances: Dict[int, Tuple[int, bytes]] = {}
        self.obj_arrays: Dict[int, ObjectArray] = {}
        self.prim_arrays: Dict[int, PrimitiveArray] = {}
        self.roots: List[int] = []

    def define(self, object_id: int) -> None:
        if object_id == NULL_ID:
            raise DanglingReference("object id 0 is reserved for null")
        if object_id in self.raw_instances or object_id in self.obj_arrays or object_id in self.prim_arrays:
            raise HeapError(f"object 0x{object_id:x} defined twice")

    # ==================== HEAP SUB-RECORDS ====================

    def heap_dump(self, cursor: _Cursor) -> None:
        while cursor.remaining > 0:
            sub_tag = cursor.u8()
            if sub_tag == SUB_ROOT_UNKNOWN:
                self.roots.append(cursor.ident())
            elif sub_tag == SUB_CLASS_DUMP:
                self._class_dump(cursor)
            elif sub_tag == SUB_INSTANCE_DUMP:
                object_id = cursor.ident()
                cursor.u32()  # stack trace serial
                class_id = cursor.ident()
                size = cursor.u32()
                self.define(object_id)
                self.raw_instances[object_id] = (class_id, cursor.take(size))
            elif sub_tag == SUB_OBJ_ARRAY_DUMP:
                object_id = cursor.ident()
                cursor.u32()
                count = cursor.u32()
                class_id = cursor.ident()
                raw = cursor.take(count * ID_SIZE)
                self.define(object_id)
                elements = struct.unpack(f">{count}I", raw)
                self.obj_arrays[object_id] = ObjectArray.model_construct(
                    id=object_id, class_id=class_id, elements=tuple(elements)
                )
            elif sub_tag == SUB_PRIM_ARRAY_DUMP:
                object_id = cursor.ident()
                cursor.u32()
                count = cursor.u32()
                element_type = cursor.basic_type()
                if element_type is BasicType.OBJECT:
                    raise TruncatedRecord(f"primitive array 0x{object_id:x} declares object elements")
                raw = cursor.take(count * element_type.width)
                self.define(object_id)
                self.prim_arrays[object_id] = PrimitiveArray.model_construct(
                    id=object_id, element_type=element_type, count=count, data=bytes(raw)
                )
            else:
                raise UnknownHeapSubRecord(f"heap sub-record 0x{sub_tag:02x} at offset {cursor.pos - 1}")

    def _class_dump(self, cursor: _Cursor) -> None:
        class_id = cursor.ident()
        cursor.u32()
        super_id = cursor.ident()
        for _ in range(5):  # class loader, signers, protection domain, 2 reserved
            cursor.ident()
        instance_size = cursor.u32()
        for _ in range(cursor.u16()):  # constant pool
            cursor.u16()
            cursor.value(cursor.basic_type())
        for _ in range(cursor.u16()):  # static fields
            cursor.ident()
            cursor.value(cursor.basic_type())
        fields = []
        for _ in range(cursor.u16()):
            name_id = cursor.ident()
            fields.append((name_id, cursor.basic_type()))
        if class_id in self.class_dumps:
            raise HeapError(f"class 0x{class_id:x} dumped twice")
        self.class_dumps[class_id] = (super_id, instance_size, fields)

    # ==================== RESOLUTION ====================

    def _string(self, string_id: int, what: str) -> str:
        if string_id not in self.strings:
            raise DanglingReference(f"{what} refers to missing string 0x{string_id:x}")
        return self.strings[string_id]

    def _classes(self) -> Dict[int, HeapClass]:
        classes = {}
        for class_id, (super_id, instance_size, fields) in self.class_dumps.items():
            if class_id not in self.class_names:
                raise DanglingReference(f"class 0x{class_id:x} has no LOAD CLASS record")
            name = normalize_class_name(self._string(self.class_names[class_id], f"class 0x{class_id:x}"))
            named_fields = tuple((self._string(n, f"field of {name}"), t) for n, t in fields)
            classes[class_id] = HeapClass.model_construct(
                id=class_id, name=name, super_id=super_id, instance_size=instance_size, fields=named_fields
            )
        for heap_class in classes.values():
            seen = set()
            current = heap_class.id
            while current != NULL_ID:
                if current in seen:
                    raise HeapError(f"class hierarchy of {heap_class.name} is cyclic")
                if current not in classes:
                    raise DanglingReference(f"superclass 0x{current:x} of {heap_class.name} is not dumped")
                seen.add(current)
                current = classes[current].super_id
        return classes

    def _layout(self, classes: Dict[int, HeapClass], class_id: int) -> List[Tuple[str, BasicType]]:
        layout = []
        while class_id != NULL_ID:
            layout.extend(classes[class_id].fields)
            class_id = classes[class_id].super_id
        return layout

    def build(self, timestamp: int) -> HeapGraph:
        classes = self._classes()
        layouts: Dict[int, List[Tuple[str, BasicType]]] = {}
        instances = {}
        for object_id, (class_id, raw) in self.raw_instances.items():
            if class_id not in classes:
                raise DanglingReference(f"instance 0x{object_id:x} has unknown class 0x{class_id:x}")
            if class_id not in layouts:
                layouts[class_id] = self._layout(classes, class_id)
            cursor = _Cursor(raw, 0, len(raw), f"instance 0x{object_id:x}")
            values = tuple((name, t, cursor.value(t)) for name, t in layouts[class_id])
            instances[object_id] = HeapInstance.model_construct(id=object_id, class_id=class_id, values=values)

        graph = HeapGraph.model_construct(
            id_size=ID_SIZE,
            timestamp=timestamp,
            strings=self.strings,
            classes=classes,
            instances=instances,
            obj_arrays=self.obj_arrays,
            prim_arrays=self.prim_arrays,
            roots=[],
        )
        _check_references(graph)
        object_roots = set()
        for root in self.roots:
            if graph.is_object(root):
                object_roots.add(root)
            elif root not in classes:
                raise DanglingReference(f"GC root 0x{root:x} does not resolve")
        graph.roots = sorted(object_roots)
        return graph


def _check_references(graph: HeapGraph) -> None:
    def resolves(target: int) -> bool:
        return target == NULL_ID or graph.is_object(target) or target in graph.classes

    for instance in graph.instances.values():
        for name, field_type, value in instance.values:
            if field_type is BasicType.OBJECT and not resolves(value):
                raise DanglingReference(f"field {name} of 0x{instance.id:x} refers to missing 0x{value:x}")
    for array in graph.obj_arrays.values():
        if array.class_id not in graph.classes:
            raise DanglingReference(f"object array 0x{array.id:x} has unknown class 0x{array.class_id:x}")
        for element in array.elements:
            if not resolves(element):
                raise DanglingReference(f"element of array 0x{array.id:x} refers to missing 0x{element:x}")


def parse_hprof(data: bytes) -> HeapGraph:
    """
    Parse a heap dump into a HeapGraph.

    Raises:
        BadHprofHeader, UnsupportedIdSize, UnknownHeapSubRecord,
        DanglingReference, TruncatedRecord
    """
    if not data.startswith(HPROF_MAGIC):
        raise BadHprofHeader(f"expected {HPROF_MAGIC!r}, found {bytes(data[:len(HPROF_MAGIC)])!r}")
    header = _Cursor(data, len(HPROF_MAGIC), len(data), "header")
    id_size = header.u32()
    if id_size != ID_SIZE:
        raise UnsupportedIdSize(f"identifier size {id_size}, only {ID_SIZE} is supported")
    timestamp = struct.unpack(">Q", header.take(8))[0]

    builder = _Builder()
    offset = header.pos
    skipped = 0
    while offset < len(data):
        top = _Cursor(data, offset, len(data), f"record at offset {offset}")
        tag = top.u8()
        top.u32()
        length = top.u32()
        body = _Cursor(data, top.pos, top.pos + length, f"record 0x{tag:02x} at offset {offset}")
        if body.end > len(data):
            raise TruncatedRecord(f"record 0x{tag:02x} at offset {offset} declares {length} bytes past end of file")

        if tag == TAG_STRING:
            string_id = body.ident()
            builder.strings[string_id] = body.take(body.remaining).decode("utf-8", errors="replace")
        elif tag == TAG_LOAD_CLASS:
            body.u32()
            class_id = body.ident()
            body.u32()
            builder.class_names[class_id] = body.ident()
        elif tag in (TAG_HEAP_DUMP, TAG_HEAP_DUMP_SEGMENT):
            builder.heap_dump(body)
        elif tag != TAG_HEAP_DUMP_END:
            skipped += 1
        offset = body.end

    graph = builder.build(timestamp)
    logger.info(
        f"Parsed heap dump: {len(graph.classes)} classes, {len(graph.instances)} instances, "
        f"{len(graph.obj_arrays) + len(graph.prim_arrays)} arrays, {len(graph.roots)} roots"
        + (f", {skipped} records skipped" if skipped else "")
    )
    return graph
