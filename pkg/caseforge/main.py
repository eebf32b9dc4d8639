# caseforge/main.py
"""
Command-line entry point.

Exit codes: 0 success, 1 any CaseforgeError (evidence integrity or operational
failure), 2 usage error.
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from caseforge import __version__
from caseforge.commands import analyze, collection, examine, monitor, report, simulate
from caseforge.commands.common import CommandContext
from caseforge.core.clock import Clock, system_clock
from caseforge.core.config import get_settings
from caseforge.core.errors import CaseforgeError
from caseforge.core.logging import configure_logging
from caseforge.repositories.case_repository import CaseRepository

logger = logging.getLogger(__name__)

USAGE_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caseforge",
        description="Android evidence collection and analysis, one case directory per device.",
    )
    parser.add_argument("--version", action="version", version=f"caseforge {__version__}")
    parser.add_argument("--case-dir", help="case directory (default: CASEFORGE_CASE_DIR or ./case)")
    parser.add_argument("--host", help="device host")
    parser.add_argument("--service-port", type=int, help="service channel port")
    parser.add_argument("--fastboot-port", type=int, help="fastboot channel port")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    for module in (simulate, collection, examine, analyze, monitor, report):
        module.register(subparsers)
    parser.epilog = "commands: " + ", ".join(subparsers.choices)
    return parser


def run(argv: Optional[List[str]] = None, clock: Clock = system_clock) -> int:
    """Parse argv, run one sub-command and return its exit code."""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE_ERROR if e.code else 0
    if not getattr(args, "handler", None):
        parser.print_usage(sys.stderr)
        print(f"caseforge: error: a command is required; {parser.epilog}", file=sys.stderr)
        return USAGE_ERROR

    settings = get_settings()
    configure_logging(args.log_level or settings.log_level)
    ctx = CommandContext(
        settings=settings,
        case_dir=Path(args.case_dir) if args.case_dir else settings.case_dir,
        clock=clock,
    )

    try:
        if getattr(args, "uses_case", True):
            with CaseRepository(ctx.case_dir).lock():
                return asyncio.run(args.handler(args, ctx))
        return asyncio.run(args.handler(args, ctx))
    except CaseforgeError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        return e.exit_code
    except KeyboardInterrupt:
        return 130


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
