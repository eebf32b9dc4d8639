# caseforge/heapkit/dominators.py
"""
Dominator tree and retained sizes.

Uses the iterative data-flow algorithm of Cooper, Harvey and Kennedy over
reverse postorder; a synthetic super-root (id 0) points at every GC root.
"""

import logging
from typing import Dict, List

from caseforge.core.errors import UnknownId, Unreachable
from caseforge.heapkit.sizes import shallow_size
from caseforge.schemas.heap import SUPER_ROOT, DominatorTree, HeapGraph

logger = logging.getLogger(__name__)


def _successors(graph: HeapGraph, node: int) -> List[int]:
    return list(graph.roots) if node == SUPER_ROOT else graph.references(node)


def _postorder(graph: HeapGraph) -> List[int]:
    """Iterative DFS postorder from the super-root."""
    order: List[int] = []
    visited = {SUPER_ROOT}
    stack = [(SUPER_ROOT, iter(_successors(graph, SUPER_ROOT)))]
    while stack:
        node, children = stack[-1]
        for child in children:
            if child not in visited:
                visited.add(child)
                stack.append((child, iter(_successors(graph, child))))
                break
        else:
            stack.pop()
            order.append(node)
    return order


def compute_dominators(graph: HeapGraph) -> DominatorTree:
    """Immediate dominator of every object reachable from the GC roots."""
    postorder = _postorder(graph)
    number = {node: i for i, node in enumerate(postorder)}
    reverse_postorder = list(reversed(postorder))

    predecessors: Dict[int, List[int]] = {node: [] for node in postorder}
    for node in postorder:
        for child in _successors(graph, node):
            predecessors[child].append(node)

    idom: Dict[int, int] = {SUPER_ROOT: SUPER_ROOT}

    def intersect(a: int, b: int) -> int:
        while a != b:
            while number[a] < number[b]:
                a = idom[a]
            while number[b] < number[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for node in reverse_postorder[1:]:
            processed = [p for p in predecessors[node] if p in idom]
            new_idom = processed[0]
            for other in processed[1:]:
                new_idom = intersect(other, new_idom)
            if idom.get(node) != new_idom:
                idom[node] = new_idom
                changed = True

    del idom[SUPER_ROOT]
    reachable = set(idom)
    unreachable = [o for o in graph.object_ids() if o not in reachable]
    if unreachable:
        logger.info(f"{len(unreachable)} objects are unreachable from the GC roots")
    return DominatorTree(idom=idom, unreachable=unreachable)


def retained_sizes(graph: HeapGraph, tree: DominatorTree) -> Dict[int, int]:
    """Retained size of every reachable object, plus the super-root's total."""
    children = tree.children()
    sizes: Dict[int, int] = {}
    stack = [(SUPER_ROOT, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            own = 0 if node == SUPER_ROOT else shallow_size(graph, node)
            sizes[node] = own + sum(sizes[c] for c in children.get(node, []))
            continue
        stack.append((node, True))
        stack.extend((c, False) for c in children.get(node, []))
    return sizes


def retained_size(graph: HeapGraph, tree: DominatorTree, object_id: int) -> int:
    """
    Sum of shallow sizes over the dominator subtree rooted at object_id.

    Raises:
        UnknownId: no such object
        Unreachable: the object is not reachable from any GC root
    """
    if object_id != SUPER_ROOT:
        if not graph.is_object(object_id):
            raise UnknownId(f"no object 0x{object_id:x} in the heap")
        if object_id not in tree.idom:
            raise Unreachable(f"object 0x{object_id:x} is not reachable from a GC root")
    children = tree.children()
    total = 0
    stack = [object_id]
    while stack:
        node = stack.pop()
        if node != SUPER_ROOT:
            total += shallow_size(graph, node)
        stack.extend(children.get(node, []))
    return total
