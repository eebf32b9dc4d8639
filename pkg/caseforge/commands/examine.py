# caseforge/commands/examine.py
"""
Examination stage: `examine apps|prefs|db|files|accounts|search`.

Delegates to ExaminationService; each target writes its findings file.
"""

import argparse
from pathlib import Path

from caseforge.commands.common import CommandContext, emit, require_verified_image
from caseforge.services.examination_service import ExaminationService


async def examine(args: argparse.Namespace, ctx: CommandContext) -> int:
    require_verified_image(ctx.case_dir, args.offline_image)
    ctx.case(args)
    offline = Path(args.offline_image) if args.offline_image else None

    if args.target == "apps":
        result = ExaminationService.examine_apps(ctx.case_dir, offline)
        emit(result.model_dump(mode="json"))
    elif args.target == "prefs":
        emit(ExaminationService.examine_prefs(ctx.case_dir, offline))
    elif args.target == "db":
        emit(ExaminationService.examine_databases(ctx.case_dir, offline))
    elif args.target == "files":
        emit(ExaminationService.examine_files(ctx.case_dir, offline))
    elif args.target == "accounts":
        emit(ExaminationService.examine_accounts(ctx.case_dir, offline).model_dump(mode="json"))
    else:
        hits = ExaminationService.search(ctx.case_dir, args.pattern, args.image, offline)
        emit([hit.model_dump(mode="json", exclude_none=True) for hit in hits])
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("examine", help="decode an acquired image into findings")
    parser.add_argument("target", choices=["apps", "prefs", "db", "files", "accounts", "search"])
    parser.add_argument(
        "--pattern", action="append", default=[],
        help="search pattern; text, or hex:<bytes> for a signature (repeatable)",
    )
    parser.add_argument("--image", default="userdata", help="partition image to search (default userdata)")
    parser.add_argument("--offline-image", help="examine this image file instead of the case's images")
    parser.set_defaults(handler=examine)
