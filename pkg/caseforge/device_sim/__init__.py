"""Simulated Android device: state machine, profile loader and TCP server."""

from caseforge.device_sim.device import (
    FLASH_ROOT,
    SDCARD_PATH,
    DeviceSimulator,
    block_device_path,
    replay_commands,
)
from caseforge.device_sim.profiles import build_profile, load_profile, materialize_accounts_db
from caseforge.device_sim.server import DeviceServer

__all__ = [
    "FLASH_ROOT",
    "SDCARD_PATH",
    "DeviceServer",
    "DeviceSimulator",
    "block_device_path",
    "build_profile",
    "load_profile",
    "materialize_accounts_db",
    "replay_commands",
]
