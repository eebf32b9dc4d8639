# caseforge/heapkit/sizes.py
from caseforge.core.errors import UnknownId
from caseforge.schemas.heap import HeapGraph

ARRAY_HEADER_SIZE = 16
REFERENCE_SIZE = 4


def shallow_size(graph: HeapGraph, object_id: int) -> int:
    """
    Bytes the object itself occupies.

    Instances use their class's instance size; arrays a 16-byte header plus
    their elements.
    """
    if object_id in graph.instances:
        return graph.classes[graph.instances[object_id].class_id].instance_size
    if object_id in graph.obj_arrays:
        return ARRAY_HEADER_SIZE + REFERENCE_SIZE * len(graph.obj_arrays[object_id].elements)
    if object_id in graph.prim_arrays:
        array = graph.prim_arrays[object_id]
        return ARRAY_HEADER_SIZE + array.element_type.width * array.count
    raise UnknownId(f"no object 0x{object_id:x} in the heap")
