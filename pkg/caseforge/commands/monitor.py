# caseforge/commands/monitor.py
"""
`monitor logcat`: capture the device log and pull credential dumps and
StaleDexCacheError worklists out of it.
"""

import argparse
from pathlib import Path

from caseforge.commands.common import CommandContext, emit
from caseforge.core.errors import ChannelUnavailable
from caseforge.device_sim.device import CREDDUMP_TAG
from caseforge.repositories.findings_repository import FindingsRepository
from caseforge.repositories.ledger_repository import LedgerRepository
from caseforge.services.accounts_service import AccountsService
from caseforge.services.report_service import ReportService

WORKLIST_FILE = "deodex-worklist.txt"


async def monitor_logcat(args: argparse.Namespace, ctx: CommandContext) -> int:
    ctx.case(args)
    if args.input:
        text = Path(args.input).read_text(encoding="utf-8")
        source = str(args.input)
    else:
        ok, text = await ctx.session(args).logcat()
        if not ok:
            raise ChannelUnavailable(f"logcat refused: {text}")
        source = "device logcat"
    lines = text.splitlines()

    findings = FindingsRepository(ctx.case_dir)
    findings.save_text("logcat.txt", text)
    summary = {"lines": len(lines), "source": source}

    if any(f" {CREDDUMP_TAG}: " in line for line in lines):
        extraction = AccountsService.parse_credential_dump(lines)
        findings.save_json("credentials", extraction.model_dump(mode="json"))
        summary["accounts"] = len(extraction.records)
        summary["warnings"] = extraction.warnings

    if args.deodex_worklist:
        items = AccountsService.build_deodex_worklist(lines)
        findings.save_text(WORKLIST_FILE, AccountsService.render_worklist(items))
        findings.save_json("deodex-worklist", [item.model_dump(mode="json") for item in items])
        summary["deodex_worklist"] = [item.model_dump(mode="json") for item in items]

    ReportService.record_change(
        LedgerRepository(ctx.case_dir), "logcat", "device", mutating=False,
        detail=f"{len(lines)} lines from {source}", clock=ctx.clock,
    )
    emit(summary)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("monitor", help="watch device output")
    sources = parser.add_subparsers(dest="source", required=True, metavar="logcat")
    logcat = sources.add_parser("logcat", help="capture logcat; decode CREDDUMP lines")
    logcat.add_argument("--deodex-worklist", action="store_true", help=f"write {WORKLIST_FILE}")
    logcat.add_argument("--input", help="read a saved logcat capture instead of the device")
    logcat.set_defaults(handler=monitor_logcat)
