# caseforge/commands/collection.py
"""
Collection stage sub-commands: identify, preserve, unlock, boot-live,
collect and verify.

Delegates business logic to AcquisitionService and ReportService.
Commands handle flags and output, services handle the device and the case.
"""

import argparse
from pathlib import Path

from caseforge.commands.common import CommandContext, emit
from caseforge.core.errors import HashMismatch
from caseforge.repositories.ledger_repository import LedgerRepository
from caseforge.schemas.device import PARTITION_NAMES
from caseforge.services.acquisition_service import (
    BOOT_JUSTIFICATION,
    SDCARD_PARTITION,
    UNLOCK_JUSTIFICATION,
    AcquisitionService,
)
from caseforge.services.report_service import ReportService

PRESERVE_OPERATION = "preserve:note"


async def identify(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Identify the device; writes device.json and a non-mutating ledger entry."""
    identity = await AcquisitionService.identify_device(ctx.session(args), ctx.case_dir, ctx.clock)
    emit(identity.model_dump(mode="json"))
    return 0


async def preserve_note(args: argparse.Namespace, ctx: CommandContext) -> int:
    """
    Record a practitioner-attested preservation step (Faraday bag,
    photographs, airplane mode) that no software can perform.
    """
    ctx.case(args)
    text = " ".join(args.text).strip()
    entry = ReportService.record_change(
        LedgerRepository(ctx.case_dir), PRESERVE_OPERATION, "device", justification=text,
        mutating=False, detail=text, clock=ctx.clock,
    )
    emit(entry.model_dump(mode="json"))
    return 0


async def unlock(args: argparse.Namespace, ctx: CommandContext) -> int:
    result = await AcquisitionService.unlock_bootloader(
        ctx.session(args), ctx.case_dir,
        unlock_key=args.key,
        allow_wipe=args.allow_wipe,
        justification=args.justification,
        clock=ctx.clock,
    )
    emit(result.model_dump(mode="json"))
    return 0


async def boot_live(args: argparse.Namespace, ctx: CommandContext) -> int:
    image = Path(args.image).read_bytes()
    result = await AcquisitionService.boot_live_os(
        ctx.session(args), ctx.case_dir, image, justification=args.justification, clock=ctx.clock,
    )
    emit(result.model_dump(mode="json"))
    return 0


async def collect(args: argparse.Namespace, ctx: CommandContext) -> int:
    """Image one partition, the SD card, or all five partitions."""
    session = ctx.session(args)
    port = ctx.tcp_port(args)
    try:
        if args.partition == "all":
            images = await AcquisitionService.acquire_all(session, ctx.case_dir, port, ctx.clock)
        elif args.partition == SDCARD_PARTITION:
            images = [await AcquisitionService.acquire_sdcard(session, ctx.case_dir, port, ctx.clock)]
        else:
            images = [await AcquisitionService.acquire_partition(session, ctx.case_dir, args.partition, port, ctx.clock)]
    except HashMismatch as e:
        unverified = e.image if isinstance(e.image, list) else [e.image]
        emit([image.model_dump(mode="json") for image in unverified if image is not None])
        raise
    emit([image.model_dump(mode="json") for image in images])
    return 0


async def verify(args: argparse.Namespace, ctx: CommandContext) -> int:
    results = AcquisitionService.verify_images(ctx.case_dir, ctx.clock)
    emit([{"image": image.file_name, "passed": passed} for image, passed in results])
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("identify", help="identify the device and its Android version")
    parser.set_defaults(handler=identify)

    parser = subparsers.add_parser("preserve", help="record a preservation step")
    actions = parser.add_subparsers(dest="action", required=True, metavar="note")
    note = actions.add_parser("note", help="attest a manual step such as 'placed in Faraday bag'")
    note.add_argument("text", nargs="+")
    note.set_defaults(handler=preserve_note)

    parser = subparsers.add_parser("unlock", help="unlock the bootloader (refuses if it would wipe userdata)")
    parser.add_argument("--key", help="vendor unlock key")
    parser.add_argument("--allow-wipe", action="store_true", help="accept a userdata wipe; recorded as ALLOW-WIPE")
    parser.add_argument("--justification", default=UNLOCK_JUSTIFICATION)
    parser.set_defaults(handler=unlock)

    parser = subparsers.add_parser("boot-live", help="boot a forensic live OS image into RAM")
    parser.add_argument("image", help="live OS boot image")
    parser.add_argument("--justification", default=BOOT_JUSTIFICATION)
    parser.set_defaults(handler=boot_live)

    parser = subparsers.add_parser("collect", help="image partitions bit-for-bit over the forwarded port")
    parser.add_argument(
        "--partition", required=True,
        choices=list(PARTITION_NAMES) + [SDCARD_PARTITION, "all"],
    )
    parser.add_argument("--port", type=int, help="forwarded TCP port (default 7000)")
    parser.set_defaults(handler=collect)

    parser = subparsers.add_parser("verify", help="re-hash every image against its metadata")
    parser.set_defaults(handler=verify)
