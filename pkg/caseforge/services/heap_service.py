# caseforge/services/heap_service.py
"""
Service layer for heap dump analysis.

Parses HPROF dumps, answers OQL queries, lists the largest objects the way a
Dominator Tree view does, and compares periodically captured dumps, either
as a finished directory or by polling one while dumps are still arriving.
"""

import asyncio
import logging
import re
from pathlib import Path
from typing import Any, Awaitable, Callable, Dict, List, Optional

from caseforge.core.clock import Clock, system_clock
from caseforge.core.errors import HeapError
from caseforge.heapkit.analysis import SeriesTracker, capture_series, top_objects
from caseforge.heapkit.dominators import compute_dominators
from caseforge.heapkit.hprof import parse_hprof
from caseforge.heapkit.oql import oql_execute, parse_query
from caseforge.repositories.findings_repository import FindingsRepository
from caseforge.schemas.heap import HeapDiff, SizeOrder

logger = logging.getLogger(__name__)

HPROF_SUFFIX = ".hprof"
_FINDING_NAME_RE = re.compile(r"[^A-Za-z0-9_.-]+")


def finding_name(path: Path) -> str:
    return "heap-" + _FINDING_NAME_RE.sub("_", path.stem)


class HeapService:
    """Service layer for HPROF analysis."""

    @staticmethod
    def analyze_dump(
            case_dir: Path,
            dump: Path,
            oql: Optional[str] = None,
            top: Optional[int] = None,
            by: SizeOrder = SizeOrder.RETAINED,
            class_prefix: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Analyse one dump and write findings/heap-<name>.json.

        Args:
            case_dir: Case directory receiving the findings
            dump: HPROF file
            oql: Query to run, e.g. SELECT s FROM java.lang.String s WHERE contains(s, "authentication")
            top: How many of the largest objects to list
            by: Sort the list by shallow or retained size
            class_prefix: Restrict the list to a class path such as com.dropbox.android

        Returns:
            dict: the findings as written

        Raises:
            HeapError: unreadable dump or invalid query
        """
        query = parse_query(oql) if oql else None
        graph = parse_hprof(Path(dump).read_bytes())
        finding: Dict[str, Any] = {
            "dump": Path(dump).name,
            "objects": len(graph.object_ids()),
            "classes": len(graph.classes),
        }
        if query is not None:
            rows = oql_execute(graph, query)
            finding["oql"] = {"query": oql, "rows": [row.model_dump(mode="json") for row in rows]}
            logger.info(f"OQL on {Path(dump).name}: {len(rows)} rows")
        if top:
            tree = compute_dominators(graph)
            rows = top_objects(graph, tree, top, by, class_prefix)
            finding["top"] = {
                "by": by.value,
                "class_prefix": class_prefix,
                "rows": [row.model_dump(mode="json") for row in rows],
            }
        FindingsRepository(case_dir).save_json(finding_name(Path(dump)), finding)
        return finding

    @staticmethod
    def analyze_series(case_dir: Path, directory: Path, interval: Optional[float] = None) -> List[HeapDiff]:
        """
        Compare consecutive dumps of a directory in name order and write
        findings/heap-series.json.

        Raises:
            HeapError: fewer than two dumps
        """
        dumps = sorted(p for p in Path(directory).iterdir() if p.suffix == HPROF_SUFFIX)
        if len(dumps) < 2:
            raise HeapError(f"{directory} holds {len(dumps)} {HPROF_SUFFIX} files; a series needs at least two")
        diffs = capture_series(dumps)
        FindingsRepository(case_dir).save_json("heap-series", {
            "interval_seconds": interval,
            "dumps": [p.name for p in dumps],
            "diffs": [diff.model_dump(mode="json") for diff in diffs],
        })
        return diffs

    @staticmethod
    async def watch_series(
            case_dir: Path,
            directory: Path,
            interval: float,
            ticks: int,
            sleep: Callable[[float], Awaitable[Any]] = asyncio.sleep,
            clock: Clock = system_clock,
    ) -> List[HeapDiff]:
        """
        Poll a directory every `interval` seconds, `ticks` times in all, and
        diff each dump that appeared since the last poll against the dump
        seen before it.

        findings/heap-series.json is rewritten after every poll. A dump that
        does not parse yet (still being written) is retried on the next poll;
        later arrivals wait behind it so diffs stay in arrival order.

        Args:
            case_dir: Case directory receiving the findings
            directory: Where the periodic dumps are dropped
            interval: Seconds between polls
            ticks: Number of polls before returning; the first one is immediate
            sleep: Awaitable sleep, injected by tests
            clock: Timestamp source for the poll log

        Returns:
            List[HeapDiff]: One diff per dump after the first, in arrival order

        Raises:
            HeapError: interval or ticks not positive
        """
        if interval <= 0 or ticks < 1:
            raise HeapError(f"polling needs a positive interval and tick count, got {interval}s x {ticks}")
        tracker = SeriesTracker()
        polls: List[Dict[str, Any]] = []
        pending: Dict[str, str] = {}
        for tick in range(ticks):
            if tick:
                await sleep(interval)
            fresh = sorted(
                p for p in Path(directory).iterdir() if p.suffix == HPROF_SUFFIX and p.name not in tracker.names
            )
            added = []
            for path in fresh:
                try:
                    tracker.add(path)
                except HeapError as e:
                    logger.warning(f"{path.name} not readable yet, retrying on the next poll: {e.detail}")
                    pending[path.name] = e.detail
                    break
                pending.pop(path.name, None)
                added.append(path.name)
            polls.append({"timestamp": clock(), "new_dumps": added})
            logger.info(f"Heap poll {tick + 1}/{ticks}: {len(added)} new dumps, {len(tracker.diffs)} diffs so far")
            FindingsRepository(case_dir).save_json("heap-series", {
                "interval_seconds": interval,
                "dumps": tracker.names,
                "polls": polls,
                "diffs": [diff.model_dump(mode="json") for diff in tracker.diffs],
                "warnings": [f"UnreadableDump: {name}: {detail}" for name, detail in pending.items()],
            })
        return tracker.diffs
