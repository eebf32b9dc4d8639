# caseforge/heapkit/analysis.py
"""
Dominator Tree style views: objects sorted by shallow or retained size, and
per-class histograms compared across periodically captured dumps.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from caseforge.heapkit.dominators import compute_dominators, retained_sizes
from caseforge.heapkit.hprof import parse_hprof
from caseforge.heapkit.oql import string_value
from caseforge.heapkit.sizes import shallow_size
from caseforge.schemas.heap import ClassDelta, DominatorTree, HeapDiff, HeapGraph, HeapObjectRow, SizeOrder

logger = logging.getLogger(__name__)

Histogram = Dict[str, Tuple[int, int]]


def top_objects(
        graph: HeapGraph,
        tree: Optional[DominatorTree],
        n: int,
        by: SizeOrder = SizeOrder.RETAINED,
        class_prefix: Optional[str] = None,
) -> List[HeapObjectRow]:
    """
    The n largest objects, ties broken by id.

    class_prefix restricts the list to classes under a class path such as
    com.dropbox.android; unreachable objects have no retained size and are
    left out of the retained view.
    """
    tree = tree or compute_dominators(graph)
    retained = retained_sizes(graph, tree)
    rows = []
    for object_id in graph.object_ids():
        class_name = graph.class_name_of(object_id)
        if class_prefix and not class_name.startswith(class_prefix):
            continue
        if by is SizeOrder.RETAINED and object_id not in retained:
            continue
        rows.append(HeapObjectRow(
            id=object_id,
            class_name=class_name,
            shallow=shallow_size(graph, object_id),
            retained=retained.get(object_id),
            value=string_value(graph, object_id) if object_id in graph.instances else None,
        ))
    key = (lambda r: (-r.retained, r.id)) if by is SizeOrder.RETAINED else (lambda r: (-r.shallow, r.id))
    rows.sort(key=key)
    return rows[:n]


def class_histogram(graph: HeapGraph) -> Histogram:
    """class name -> (object count, total shallow size)."""
    histogram: Dict[str, List[int]] = {}
    for object_id in graph.object_ids():
        bucket = histogram.setdefault(graph.class_name_of(object_id), [0, 0])
        bucket[0] += 1
        bucket[1] += shallow_size(graph, object_id)
    return {name: (count, size) for name, (count, size) in histogram.items()}


def diff_histograms(before: Histogram, after: Histogram, before_name: str, after_name: str) -> HeapDiff:
    changes = []
    for name in sorted(set(before) | set(after)):
        count_before, size_before = before.get(name, (0, 0))
        count_after, size_after = after.get(name, (0, 0))
        if (count_before, size_before) == (count_after, size_after):
            continue
        changes.append(ClassDelta(
            class_name=name,
            instances_before=count_before,
            instances_after=count_after,
            shallow_before=size_before,
            shallow_after=size_after,
        ))
    return HeapDiff(before=before_name, after=after_name, changes=changes)


class SeriesTracker:
    """Diffs every added dump against the one added before it."""

    def __init__(self):
        self.names: List[str] = []
        self.diffs: List[HeapDiff] = []
        self._previous: Optional[Tuple[str, Histogram]] = None

    def add(self, path: Path) -> Optional[HeapDiff]:
        """Raises HeapError for an unreadable dump; the tracker is left unchanged."""
        histogram = class_histogram(parse_hprof(path.read_bytes()))
        diff = None
        if self._previous is not None:
            diff = diff_histograms(self._previous[1], histogram, self._previous[0], path.name)
            self.diffs.append(diff)
        self._previous = (path.name, histogram)
        self.names.append(path.name)
        return diff


def capture_series(dumps: List[Path]) -> List[HeapDiff]:
    """Diff consecutive dumps, taken in file-name order."""
    tracker = SeriesTracker()
    for path in sorted(dumps, key=lambda p: p.name):
        tracker.add(path)
    logger.info(f"Compared {len(tracker.names)} heap snapshots")
    return tracker.diffs
