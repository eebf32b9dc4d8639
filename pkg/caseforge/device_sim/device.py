# caseforge/device_sim/device.py
"""
Simulated Android device.

DeviceSimulator owns one DeviceProfile and answers the two channels the
acquisition client speaks: the fastboot command channel and the service
channel (getprop / shell / forward / logcat). Service requests never touch
partition bytes; only unlock (with wipe semantics) and boot change state.
"""

import hashlib
import logging
from typing import Callable, Iterable, Iterator, List, Optional, Tuple
from urllib.parse import quote

from caseforge.core.clock import Clock, system_clock
from caseforge.core.errors import SignatureCheckActive
from caseforge.protocol.frames import TERMINATOR, chunk_stream, encode_frame
from caseforge.protocol.messages import FastbootResponse, FastbootStatus, ServiceRequest, fail, okay
from caseforge.schemas.device import BootloaderState, BootState, DeviceProfile, LogLine

logger = logging.getLogger(__name__)

FLASH_ROOT = "dev/block/platform/msm_sdcc.1/by-name/"
SDCARD_PATH = "dev/block/platform/s3c-sdhci.2/mmcblk1"
FASTBOOT_PROTOCOL_VERSION = "0.4"

CREDDUMP_TAG = "CREDDUMP"
DEXOPT_TAG = "dalvikvm"
NULL_VALUE = "<null>"

_HASHERS = {"md5sum": hashlib.md5, "sha1sum": hashlib.sha1}


def encode_dump_value(value: Optional[str]) -> str:
    """Percent-encode one CREDDUMP field value; None renders as <null>."""
    if value is None:
        return NULL_VALUE
    return quote(value, safe="@.-_~+:/")


def block_device_path(partition: str) -> str:
    return FLASH_ROOT + partition


class DeviceSimulator:
    """
    Protocol-faithful device double.

    All timestamps come from the injected clock, so the same profile and the
    same command sequence always yield the same state and response bytes.
    """

    def __init__(self, profile: DeviceProfile, clock: Clock = system_clock):
        self.profile = profile
        self.clock = clock
        self.pending_download: Optional[bytes] = None

    # ==================== STATE HELPERS ====================

    def snapshot(self) -> DeviceProfile:
        """Immutable-by-convention deep copy, safe to hand to another thread."""
        return self.profile.model_copy(deep=True)

    def log(self, tag: str, message: str) -> LogLine:
        line = LogLine(timestamp=self.clock(), tag=tag, message=message)
        self.profile.logcat_log.append(line)
        return line

    def block_bytes(self, device_path: str) -> Optional[bytes]:
        """Bytes as read from a block device node, or None for unknown nodes."""
        path = device_path.lstrip("/")
        if path == SDCARD_PATH:
            return self.profile.sdcard
        if not path.startswith(FLASH_ROOT):
            return None
        name = path[len(FLASH_ROOT):]
        if name not in self.profile.partitions:
            return None
        data = self.profile.partitions[name]
        if name == "userdata" and self.profile.encryption_enabled:
            key = self.profile.encryption_key_byte
            data = data.translate(bytes(b ^ key for b in range(256)))
        return data

    def _apply_unlock(self) -> str:
        wiped = self.profile.unlock_wipes
        if wiped:
            size = len(self.profile.partitions["userdata"])
            self.profile.partitions["userdata"] = bytes(size)
        self.profile.bootloader = BootloaderState.UNLOCKED
        self.pending_download = None
        note = "bootloader unlocked (userdata wiped)" if wiped else "bootloader unlocked"
        self.log("fastboot", f"oem unlock: {note}")
        logger.info(f"Simulator: {note}")
        return note

    # ==================== FASTBOOT CHANNEL ====================

    def handle_fastboot(self, command: str, data: Optional[bytes] = None) -> FastbootResponse:
        """
        Execute one fastboot command.

        Supported: getvar:<product|version|unlocked|unlock-wipes>, oem unlock,
        oem unlock:<key>, boot (with the DATA phase bytes in `data`).
        """
        if self.profile.boot_state is not BootState.FASTBOOT_MODE:
            return fail("device not in fastboot mode")

        if command.startswith("getvar:"):
            return self._getvar(command[len("getvar:"):])

        if command == "oem unlock" or command.startswith("oem unlock:"):
            key = command[len("oem unlock:"):] if ":" in command else None
            return self._oem_unlock(key)

        if command == "boot":
            return self._boot(data)

        return fail(f"unknown command '{command}'")

    def _getvar(self, name: str) -> FastbootResponse:
        values = {
            "product": self.profile.product,
            "version": FASTBOOT_PROTOCOL_VERSION,
            "unlocked": "yes" if self.profile.bootloader is BootloaderState.UNLOCKED else "no",
            "unlock-wipes": "yes" if self.profile.unlock_wipes else "no",
        }
        if not self.profile.reports_unlock_wipes:
            del values["unlock-wipes"]
        if name not in values:
            return fail("GetVar Variable Not found")
        return okay(values[name])

    def _oem_unlock(self, key: Optional[str]) -> FastbootResponse:
        if self.profile.bootloader is BootloaderState.UNLOCKED:
            return okay("already unlocked")

        if not self.profile.requires_unlock_key:
            return okay(self._apply_unlock())

        if key is None:
            challenge = self.profile.unlock_challenge
            if self.profile.bootloader is not BootloaderState.UNLOCK_PENDING_KEY:
                self.profile.bootloader = BootloaderState.UNLOCK_PENDING_KEY
                self.log("fastboot", f"oem unlock: key requested, challenge {challenge}")
            return fail(f"need key: {challenge}")

        if key != self.profile.unlock_key:
            return fail("wrong key")
        return okay(self._apply_unlock())

    def begin_download(self, size: int) -> FastbootResponse:
        """First half of the DATA phase: announce how many bytes will follow."""
        if self.profile.boot_state is not BootState.FASTBOOT_MODE:
            return fail("device not in fastboot mode")
        if size <= 0:
            return fail("empty download")
        return FastbootResponse(status=FastbootStatus.DATA, body=f"{size:08x}")

    def finish_download(self, data: bytes, expected: int) -> FastbootResponse:
        if len(data) != expected:
            self.pending_download = None
            return fail(f"download size mismatch: expected {expected}, got {len(data)}")
        self.pending_download = data
        return okay()

    def _boot(self, data: Optional[bytes]) -> FastbootResponse:
        if not data:
            return fail("no image downloaded")
        if self.profile.bootloader is not BootloaderState.UNLOCKED:
            return fail("boot refused: bootloader locked")
        self.profile.boot_state = BootState.LIVE_OS
        self.pending_download = None
        self.log("fastboot", f"boot: live OS image of {len(data)} bytes booted into RAM")
        logger.info("Simulator: live OS booted")
        return okay()

    # ==================== SERVICE CHANNEL ====================

    def _service_refusal(self, request: ServiceRequest) -> Optional[str]:
        state = self.profile.boot_state
        if state is BootState.FASTBOOT_MODE:
            return "device offline"
        if state is BootState.STOCK_LOCKED:
            return "device unauthorized"
        if request.kind in ("shell", "forward") and state is not BootState.LIVE_OS:
            return "block devices require the live OS"
        return None

    def iter_service(self, request: ServiceRequest) -> Iterator[bytes]:
        """Yield the encoded response frames for one service request."""
        refusal = self._service_refusal(request)
        if refusal:
            yield encode_frame(b"FAIL" + refusal.encode("utf-8"))
            return

        if request.kind == "getprop":
            yield encode_frame(b"OKAY")
            yield encode_frame(self._getprop(request.argument).encode("utf-8"))
            return

        if request.kind == "logcat":
            yield encode_frame(b"OKAY")
            text = "".join(line.render() for line in self.profile.logcat_log)
            yield from chunk_stream(text.encode("utf-8"))
            return

        if request.kind == "shell":
            ok, output = self._shell(request.argument)
            if not ok:
                yield encode_frame(b"FAIL" + output.encode("utf-8"))
                return
            yield encode_frame(b"OKAY")
            yield from chunk_stream(output.encode("utf-8"))
            return

        # forward
        data = self.block_bytes(request.argument)
        if data is None:
            yield encode_frame(b"FAIL" + b"no such device")
            return
        yield encode_frame(b"OKAY")
        yield from self._forward_frames(data)

    def handle_service(self, request: ServiceRequest) -> bytes:
        return b"".join(self.iter_service(request))

    def _getprop(self, name: str) -> str:
        props = {
            "ro.product.model": self.profile.model,
            "ro.product.name": self.profile.product,
            "ro.build.version.release": self.profile.android_version,
            "ro.crypto.state": "encrypted" if self.profile.encryption_enabled else "unencrypted",
            "ro.boot.flash.locked": "0" if self.profile.bootloader is BootloaderState.UNLOCKED else "1",
            "sys.lockscreen.enabled": "1" if self.profile.screen_lock_enabled else "0",
        }
        return props.get(name, "")

    def _shell(self, command: str) -> Tuple[bool, str]:
        """coreutils-style md5sum / sha1sum over a block device node."""
        parts = command.split()
        if len(parts) != 2 or parts[0] not in _HASHERS:
            return False, f"unsupported command '{command}'"
        tool, path = parts
        data = self.block_bytes(path)
        if data is None:
            return False, f"{tool}: {path}: No such file or directory"
        digest = _HASHERS[tool](data).hexdigest()
        return True, f"{digest}  {path}\n"

    def _forward_frames(self, data: bytes) -> Iterator[bytes]:
        faults = self.profile.faults
        if faults.flip_bit is not None and faults.flip_bit < len(data) * 8:
            mutable = bytearray(data)
            mutable[faults.flip_bit // 8] ^= 1 << (faults.flip_bit % 8)
            data = bytes(mutable)
            logger.debug(f"Simulator: flipped bit {faults.flip_bit} in transit")
        if faults.truncate_at is not None:
            encoded = b"".join(chunk_stream(data))
            # Cut the framed stream inside the payload, dropping the terminator.
            yield encoded[:min(len(encoded) - len(TERMINATOR), faults.truncate_at)]
            return
        yield from chunk_stream(data)

    # ==================== LOGCAT EVENT SOURCES ====================

    def emit_credential_dump(self) -> List[LogLine]:
        """
        Dump the secure store to logcat, as a services layer patched to skip
        the caller-signature check would.

        Raises:
            SignatureCheckActive: signature checks still enforced
        """
        if not self.profile.signature_check_bypassed:
            raise SignatureCheckActive("AccountManager requires the caller signature to match")
        lines = []
        for account in self.profile.accounts_store:
            lines.append(self.log(
                CREDDUMP_TAG,
                f"account id={account.id} name={encode_dump_value(account.name)} "
                f"type={encode_dump_value(account.type)} password={encode_dump_value(account.password)}",
            ))
            for token_type, token in account.authtokens:
                lines.append(self.log(
                    CREDDUMP_TAG,
                    f"authtoken account={account.id} type={encode_dump_value(token_type)} "
                    f"authtoken={encode_dump_value(token)}",
                ))
            for key, value in account.extras:
                lines.append(self.log(
                    CREDDUMP_TAG,
                    f"extra account={account.id} key={encode_dump_value(key)} value={encode_dump_value(value)}",
                ))
        logger.info(f"Simulator: credential dump of {len(self.profile.accounts_store)} accounts")
        return lines

    def emit_stale_dex_error(self, package: str) -> LogLine:
        return self.log(
            DEXOPT_TAG,
            f"DexOpt: StaleDexCacheError: /system/framework/{package}.jar needs rebuild",
        )


def replay_commands(
        profile: DeviceProfile,
        commands: Iterable[str],
        clock: Clock = system_clock,
        boot_payload: Callable[[], bytes] = lambda: b"replayed-live-os",
) -> DeviceProfile:
    """
    Re-run recorded fastboot commands against a copy of `profile` and return
    the resulting state. "boot" receives a stand-in image since boot leaves
    every partition untouched regardless of image content.
    """
    simulator = DeviceSimulator(profile.model_copy(deep=True), clock)
    for command in commands:
        data = boot_payload() if command == "boot" else None
        response = simulator.handle_fastboot(command, data)
        logger.debug(f"Replay '{command}' -> {response.status.value}{response.body}")
    return simulator.profile
