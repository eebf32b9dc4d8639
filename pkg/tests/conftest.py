import asyncio
import logging
import threading

import pytest

from caseforge.acquisition.session import DeviceSession
from caseforge.core.clock import FixedClock
from caseforge.device_sim.device import DeviceSimulator
from caseforge.device_sim.profiles import load_profile
from caseforge.device_sim.server import DeviceServer
from tests.builders import live_profile_config, profile_config

CLOCK_START = 1_400_000_000


# ============================================================
# LOGGING
# ============================================================

@pytest.fixture(autouse=True)
def restore_logging():
    """
    The CLI installs its own stderr handlers through dictConfig. Undo that after
    every test so pytest's capture handlers keep seeing caseforge records.
    """
    root = logging.getLogger()
    caseforge_logger = logging.getLogger("caseforge")
    root_level = root.level
    yield
    for logger in (root, caseforge_logger):
        for handler in list(logger.handlers):
            if type(handler) is logging.StreamHandler:
                logger.removeHandler(handler)
    caseforge_logger.propagate = True
    caseforge_logger.setLevel(logging.NOTSET)
    root.setLevel(root_level)


# ============================================================
# CORE FIXTURES
# ============================================================

@pytest.fixture
def clock():
    """Deterministic clock: starts at 1400000000 and ticks one second per reading."""
    return FixedClock(CLOCK_START, step=1)


@pytest.fixture
def case_dir(tmp_path):
    """Fresh, not yet created case directory."""
    return tmp_path / "case-001"


@pytest.fixture
def locked_profile():
    """Locked device sitting in fastboot mode."""
    return load_profile(profile_config())


@pytest.fixture
def live_profile():
    """Unlocked device already booted into the live OS."""
    return load_profile(live_profile_config())


# ============================================================
# SIMULATED DEVICE OVER TCP
# ============================================================

class ThreadedDevice:
    """
    DeviceServer running on its own event loop in a daemon thread.

    CLI runs call asyncio.run themselves, so the device cannot share their
    loop. Async tests can talk to it just the same.
    """

    def __init__(self, simulator: DeviceSimulator):
        self.simulator = simulator
        self.loop = asyncio.new_event_loop()
        self.thread = threading.Thread(target=self.loop.run_forever, daemon=True)
        self.server = None

    def start(self) -> "ThreadedDevice":
        self.thread.start()
        server = DeviceServer(self.simulator)
        self.server = asyncio.run_coroutine_threadsafe(server.start(), self.loop).result(5)
        return self

    def stop(self) -> None:
        if self.loop.is_closed():
            return
        if self.server is not None:
            asyncio.run_coroutine_threadsafe(self.server.stop(), self.loop).result(5)
            self.server = None
        self.loop.call_soon_threadsafe(self.loop.stop)
        self.thread.join(5)
        self.loop.close()

    @property
    def profile(self):
        return self.simulator.profile

    @property
    def service_port(self) -> int:
        return self.server.service_port

    @property
    def fastboot_port(self) -> int:
        return self.server.fastboot_port

    @property
    def forward_port(self) -> int:
        return self.server.forward_port

    def session(self) -> DeviceSession:
        return DeviceSession("127.0.0.1", self.service_port, self.fastboot_port, timeout=5.0)

    def cli_args(self, case_dir) -> list:
        """Global flags that point the CLI at this device and case."""
        return [
            "--case-dir", str(case_dir),
            "--service-port", str(self.service_port),
            "--fastboot-port", str(self.fastboot_port),
        ]


@pytest.fixture
def device_server(clock):
    """
    Factory: device_server(profile) starts a simulator for `profile` and
    returns the ThreadedDevice. Every device is stopped at teardown.

    Use this when:
    - A test needs the real wire protocol (sessions, acquisition, CLI)
    - Several devices are needed in one test
    """
    devices = []

    def start(profile) -> ThreadedDevice:
        device = ThreadedDevice(DeviceSimulator(profile, clock)).start()
        devices.append(device)
        return device

    yield start
    for device in devices:
        device.stop()
