# caseforge/schemas/heap.py
"""
Object graph parsed from an HPROF heap dump.

Nodes of the graph are instances and arrays; class objects only describe
layout. Id 0 is the null reference and doubles as the synthetic super-root of
the dominator tree.
"""

from enum import Enum, IntEnum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

NULL_ID = 0
SUPER_ROOT = 0

FieldValue = Union[None, bool, int, float]


class BasicType(IntEnum):
    OBJECT = 2
    BOOLEAN = 4
    CHAR = 5
    FLOAT = 6
    DOUBLE = 7
    BYTE = 8
    SHORT = 9
    INT = 10
    LONG = 11

    @property
    def width(self) -> int:
        """Bytes per value in an id-size-4 dump."""
        return _WIDTHS[self]

    @property
    def java_name(self) -> str:
        return self.name.lower()


_WIDTHS = {
    BasicType.OBJECT: 4,
    BasicType.BOOLEAN: 1,
    BasicType.BYTE: 1,
    BasicType.CHAR: 2,
    BasicType.SHORT: 2,
    BasicType.FLOAT: 4,
    BasicType.INT: 4,
    BasicType.DOUBLE: 8,
    BasicType.LONG: 8,
}


class HeapClass(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    name: str
    super_id: int = NULL_ID
    instance_size: int = Field(0, ge=0)
    fields: Tuple[Tuple[str, BasicType], ...] = ()


class HeapInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    class_id: int
    # Field values in layout order, subclass fields first.
    values: Tuple[Tuple[str, BasicType, FieldValue], ...] = ()

    def field(self, name: str) -> Tuple[bool, FieldValue, Optional[BasicType]]:
        """(present, value, type) of the first field called `name`."""
        for field_name, field_type, value in self.values:
            if field_name == name:
                return True, value, field_type
        return False, None, None

    def references(self) -> List[int]:
        return [v for _, t, v in self.values if t is BasicType.OBJECT and v]


class ObjectArray(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    class_id: int
    elements: Tuple[int, ...] = ()


class PrimitiveArray(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    element_type: BasicType
    count: int = Field(..., ge=0)
    data: bytes = b""

    @property
    def class_name(self) -> str:
        return f"{self.element_type.java_name}[]"


class HeapGraph(BaseModel):
    id_size: int = 4
    timestamp: int = 0
    strings: Dict[int, str] = Field(default_factory=dict)
    classes: Dict[int, HeapClass] = Field(default_factory=dict)
    instances: Dict[int, HeapInstance] = Field(default_factory=dict)
    obj_arrays: Dict[int, ObjectArray] = Field(default_factory=dict)
    prim_arrays: Dict[int, PrimitiveArray] = Field(default_factory=dict)
    roots: List[int] = Field(default_factory=list)

    def is_object(self, object_id: int) -> bool:
        return object_id in self.instances or object_id in self.obj_arrays or object_id in self.prim_arrays

    def object_ids(self) -> List[int]:
        return sorted([*self.instances, *self.obj_arrays, *self.prim_arrays])

    def references(self, object_id: int) -> List[int]:
        """Outgoing edges: non-null instance fields and array elements that are objects."""
        if object_id in self.instances:
            targets = self.instances[object_id].references()
        elif object_id in self.obj_arrays:
            targets = [e for e in self.obj_arrays[object_id].elements if e]
        else:
            return []
        return [t for t in targets if self.is_object(t)]

    def class_name_of(self, object_id: int) -> str:
        if object_id in self.instances:
            return self.classes[self.instances[object_id].class_id].name
        if object_id in self.obj_arrays:
            return self.classes[self.obj_arrays[object_id].class_id].name
        return self.prim_arrays[object_id].class_name

    def superclass_names(self, class_id: int) -> List[str]:
        """The class and all its ancestors, most specific first."""
        names = []
        while class_id != NULL_ID and class_id in self.classes:
            heap_class = self.classes[class_id]
            names.append(heap_class.name)
            class_id = heap_class.super_id
        return names


class DominatorTree(BaseModel):
    """idom maps every reachable object to its immediate dominator (SUPER_ROOT for roots)."""
    idom: Dict[int, int] = Field(default_factory=dict)
    unreachable: List[int] = Field(default_factory=list)

    def children(self) -> Dict[int, List[int]]:
        tree: Dict[int, List[int]] = {}
        for node, parent in self.idom.items():
            tree.setdefault(parent, []).append(node)
        for kids in tree.values():
            kids.sort()
        return tree


class SizeOrder(str, Enum):
    SHALLOW = "shallow"
    RETAINED = "retained"


class HeapObjectRow(BaseModel):
    id: int
    class_name: str
    shallow: int
    retained: Optional[int] = None
    value: Optional[str] = None


class ClassDelta(BaseModel):
    class_name: str
    instances_before: int
    instances_after: int
    shallow_before: int
    shallow_after: int

    @property
    def instance_delta(self) -> int:
        return self.instances_after - self.instances_before

    @property
    def shallow_delta(self) -> int:
        return self.shallow_after - self.shallow_before


class HeapDiff(BaseModel):
    before: str
    after: str
    changes: List[ClassDelta] = Field(default_factory=list)


class OqlRow(BaseModel):
    id: int
    class_name: str
    value: Union[None, bool, int, float, str] = None
