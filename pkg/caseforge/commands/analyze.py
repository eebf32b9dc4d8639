# caseforge/commands/analyze.py
"""Analysis stage: `analyze heap <dump|directory>`."""

import argparse
from pathlib import Path

from caseforge.commands.common import CommandContext, emit, require_verified_image
from caseforge.schemas.heap import SizeOrder
from caseforge.services.heap_service import HeapService


async def analyze_heap(args: argparse.Namespace, ctx: CommandContext) -> int:
    """
    One dump: OQL and/or the largest-objects list.
    A directory: per-class changes between consecutive dumps; with --interval
    the directory is polled --ticks times while new dumps arrive.
    """
    require_verified_image(ctx.case_dir, args.offline_image)
    ctx.case(args)
    path = Path(args.path)
    if path.is_dir():
        if args.interval is None:
            diffs = HeapService.analyze_series(ctx.case_dir, path)
        else:
            diffs = await HeapService.watch_series(ctx.case_dir, path, args.interval, args.ticks, clock=ctx.clock)
        emit([diff.model_dump(mode="json") for diff in diffs])
        return 0
    finding = HeapService.analyze_dump(
        ctx.case_dir, path,
        oql=args.oql,
        top=args.top,
        by=SizeOrder(args.by),
        class_prefix=args.class_prefix,
    )
    emit(finding)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("analyze", help="analyse app memory captured from the device")
    kinds = parser.add_subparsers(dest="kind", required=True, metavar="heap")
    heap = kinds.add_parser("heap", help="HPROF dump, or a directory of periodic dumps")
    heap.add_argument("path")
    heap.add_argument("--oql", help='e.g. SELECT s FROM java.lang.String s WHERE contains(s, "authentication")')
    heap.add_argument("--top", type=int, help="list the N largest objects")
    heap.add_argument("--by", choices=[o.value for o in SizeOrder], default=SizeOrder.RETAINED.value)
    heap.add_argument("--class-prefix", help="restrict --top to a class path such as com.dropbox.android")
    heap.add_argument("--interval", type=float, help="poll a dump directory every S seconds")
    heap.add_argument("--ticks", type=int, default=10, help="number of polls with --interval (default 10)")
    heap.add_argument(
        "--offline-image", action="store_true",
        help="the dump was not captured from an image acquired in this case",
    )
    heap.set_defaults(handler=analyze_heap)
