# caseforge/commands/simulate.py
"""
`simulate <profile.json>`: serve a simulated device so the whole pipeline
can be driven from a second terminal.
"""

import argparse
import logging

from caseforge.commands.common import CommandContext, emit
from caseforge.device_sim.device import DeviceSimulator
from caseforge.device_sim.profiles import load_profile
from caseforge.device_sim.server import DeviceServer

logger = logging.getLogger(__name__)


async def simulate(args: argparse.Namespace, ctx: CommandContext) -> int:
    simulator = DeviceSimulator(load_profile(args.profile), ctx.clock)
    if args.credential_dump:
        simulator.emit_credential_dump()
    for package in args.stale_dex:
        simulator.emit_stale_dex_error(package)

    settings = ctx.settings
    server = DeviceServer(
        simulator,
        host=args.host or settings.host,
        service_port=settings.service_port if args.service_port is None else args.service_port,
        fastboot_port=settings.fastboot_port if args.fastboot_port is None else args.fastboot_port,
        forward_port=settings.forward_port if args.forward_port is None else args.forward_port,
    )
    async with server:
        emit({
            "host": server.host,
            "service_port": server.service_port,
            "fastboot_port": server.fastboot_port,
            "forward_port": server.forward_port,
        })
        try:
            await server.serve_forever()
        finally:
            logger.info("Simulator stopped")
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="run the embedded device simulator")
    parser.add_argument("profile", help="profile JSON")
    parser.add_argument("--forward-port", type=int, help="port standing in for 'adb forward tcp:N' (default 7000)")
    parser.add_argument(
        "--credential-dump", action="store_true",
        help="emit the secure-store dump to logcat (profile must bypass the signature check)",
    )
    parser.add_argument(
        "--stale-dex", action="append", default=[], metavar="PACKAGE",
        help="log a StaleDexCacheError for PACKAGE (repeatable)",
    )
    parser.set_defaults(handler=simulate, uses_case=False)
