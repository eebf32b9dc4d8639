# caseforge/commands/report.py
"""`report`: write report.json and report.md from the case directory."""

import argparse

from caseforge.commands.common import CommandContext, emit
from caseforge.services.report_service import ReportService


async def report(args: argparse.Namespace, ctx: CommandContext) -> int:
    case_report, json_path, md_path = ReportService.generate_report(ctx.case_dir)
    emit({
        "report_json": str(json_path),
        "report_md": str(md_path),
        "ledger_chain_valid": case_report.ledger_chain_valid,
        "warnings": case_report.warnings,
    })
    return 0 if case_report.ledger_chain_valid else 1


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("report", help="assemble the chain-of-custody report")
    parser.set_defaults(handler=report)
