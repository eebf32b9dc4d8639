"""Heap dump analysis: HPROF parsing, dominator tree, retained sizes, OQL."""

from caseforge.heapkit.analysis import capture_series, class_histogram, diff_histograms, top_objects
from caseforge.heapkit.dominators import compute_dominators, retained_size, retained_sizes
from caseforge.heapkit.hprof import parse_hprof
from caseforge.heapkit.oql import oql_execute, parse_query, string_value
from caseforge.heapkit.sizes import shallow_size

__all__ = [
    "capture_series",
    "class_histogram",
    "compute_dominators",
    "diff_histograms",
    "oql_execute",
    "parse_hprof",
    "parse_query",
    "retained_size",
    "retained_sizes",
    "shallow_size",
    "string_value",
    "top_objects",
]
