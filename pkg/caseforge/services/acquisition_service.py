# caseforge/services/acquisition_service.py
"""
Async Service layer for the collection stage.

This service handles:
- Identifying the device over whichever channel answers
- Unlocking the bootloader behind the wipe guard
- Booting the forensic live OS into RAM
- Streaming partitions bit-for-bit with incremental MD5/SHA1
- Re-verifying acquired images on disk

Every step is written to the change ledger through ReportService.
"""

import asyncio
import hashlib
import logging
from pathlib import Path
from typing import List, Optional, Tuple

from caseforge.acquisition.session import DeviceSession
from caseforge.core.clock import Clock, system_clock
from caseforge.core.errors import (
    AcquisitionError,
    BootRefused,
    ChannelUnavailable,
    HashMismatch,
    MissingTerminator,
    NotInFastboot,
    StreamTruncated,
    TransferFailed,
    Truncated,
    UnknownPartition,
    UnlockKeyRequired,
    WipeGuardTriggered,
    WrongKey,
)
from caseforge.device_sim.device import SDCARD_PATH, block_device_path
from caseforge.protocol.frames import read_frame
from caseforge.protocol.messages import FastbootResponse, ServiceRequest
from caseforge.repositories.case_repository import CaseRepository
from caseforge.repositories.image_repository import ImageRepository
from caseforge.repositories.ledger_repository import LedgerRepository
from caseforge.schemas.acquisition import UNKNOWN_LOCKED, AcquiredImage, BootResult, DeviceIdentity, UnlockResult
from caseforge.schemas.device import PARTITION_NAMES, BootloaderState
from caseforge.schemas.report import DEFAULT_FORWARD_PORT
from caseforge.services.report_service import ReportService

logger = logging.getLogger(__name__)

UNLOCK_JUSTIFICATION = "required to boot the forensic live OS"
BOOT_JUSTIFICATION = "live OS runs from RAM so flash is not modified"
ALLOW_WIPE_PREFIX = "ALLOW-WIPE: "
SDCARD_PARTITION = "sdcard"
EMULATED_SDCARD = "data/media/0"

_NOT_IN_FASTBOOT = "device not in fastboot mode"
_HASH_CHUNK = 1 << 20


def parse_digest_output(output: str) -> str:
    """First field of coreutils-style '<hex>  <path>' output."""
    fields = output.split()
    if not fields:
        raise AcquisitionError("device returned no digest")
    return fields[0].lower()


def hash_file(path: Path) -> Tuple[str, str]:
    md5, sha1 = hashlib.md5(), hashlib.sha1()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(_HASH_CHUNK), b""):
            md5.update(chunk)
            sha1.update(chunk)
    return md5.hexdigest(), sha1.hexdigest()


class AcquisitionService:
    """Async service layer for identification, unlock, live boot and imaging."""

    # ==================== IDENTIFY ====================

    @staticmethod
    async def identify_device(session: DeviceSession, case_dir: Path, clock: Clock = system_clock) -> DeviceIdentity:
        """
        Identify the device from getprop, or from fastboot getvar when the
        service channel refuses.

        Args:
            session: Connection to the device
            case_dir: Case directory receiving device.json and the ledger entry
            clock: Timestamp source

        Returns:
            DeviceIdentity: What the device disclosed

        Raises:
            ChannelUnavailable: neither channel answered
        """
        identity = None
        try:
            ok, model = await session.getprop("ro.product.model")
            if ok:
                identity = await AcquisitionService._identify_service(session, model)
            else:
                logger.info(f"Service channel refused ({model}); asking the bootloader")
        except ChannelUnavailable as e:
            logger.info(f"Service channel unavailable ({e.detail}); asking the bootloader")

        if identity is None:
            identity = await AcquisitionService._identify_fastboot(session)

        CaseRepository(case_dir).save_device(identity)
        ReportService.record_change(
            LedgerRepository(case_dir),
            operation="identify",
            target="device",
            detail=f"{identity.model} Android {identity.android_version} via {identity.channel}",
            clock=clock,
        )
        logger.info(f"Identified {identity.model}, Android {identity.android_version}, bootloader {identity.bootloader_state}")
        return identity

    @staticmethod
    async def _identify_service(session: DeviceSession, model: str) -> DeviceIdentity:
        _, version = await session.getprop("ro.build.version.release")
        _, product = await session.getprop("ro.product.name")
        _, crypto = await session.getprop("ro.crypto.state")
        _, locked = await session.getprop("ro.boot.flash.locked")
        _, lockscreen = await session.getprop("sys.lockscreen.enabled")
        bootloader = BootloaderState.UNLOCKED if locked == "0" else BootloaderState.LOCKED
        return DeviceIdentity(
            model=model,
            android_version=version or UNKNOWN_LOCKED,
            bootloader_state=bootloader.value,
            encryption_suspected=crypto == "encrypted",
            screen_lock=lockscreen != "0",
            product=product or None,
            channel="service",
        )

    @staticmethod
    async def _identify_fastboot(session: DeviceSession) -> DeviceIdentity:
        product, unlocked = await session.getvars("product", "unlocked")
        name = product.body if product.ok and product.body else "unknown"
        bootloader = BootloaderState.UNLOCKED if unlocked.ok and unlocked.body == "yes" else BootloaderState.LOCKED
        return DeviceIdentity(
            model=name,
            android_version=UNKNOWN_LOCKED,
            bootloader_state=bootloader.value,
            product=name,
            channel="fastboot",
        )

    # ==================== UNLOCK ====================

    @staticmethod
    async def unlock_bootloader(
            session: DeviceSession,
            case_dir: Path,
            unlock_key: Optional[str] = None,
            allow_wipe: bool = False,
            justification: str = UNLOCK_JUSTIFICATION,
            clock: Clock = system_clock,
    ) -> UnlockResult:
        """
        Unlock the bootloader, refusing before any command is sent when the
        device would wipe userdata.

        Args:
            session: Connection to the device
            case_dir: Case directory holding the ledger
            unlock_key: Vendor unlock key, when the device demands one
            allow_wipe: Accept a userdata wipe; the justification is marked ALLOW-WIPE
            justification: Reason recorded with the mutating entry
            clock: Timestamp source

        Returns:
            UnlockResult: Outcome, with an AlreadyUnlocked warning when nothing was done

        Raises:
            NotInFastboot: device is not in bootloader mode
            WipeGuardTriggered: unlock may wipe userdata (anything but an explicit "no") and allow_wipe is off
            UnlockKeyRequired: device demands a key (carries the challenge)
            WrongKey: device rejected the key
        """
        ledger = LedgerRepository(case_dir)
        unlocked, wipes = await session.getvars("unlocked", "unlock-wipes")
        if not unlocked.ok:
            raise AcquisitionService._fastboot_failure(unlocked, AcquisitionError)

        if unlocked.body == "yes":
            warning = "AlreadyUnlocked: bootloader was already unlocked, nothing sent"
            logger.warning(warning)
            ReportService.record_change(
                ledger, "oem unlock", "device", justification, mutating=False,
                detail="already unlocked; no command issued", clock=clock,
            )
            return UnlockResult(unlocked=True, already_unlocked=True, warnings=[warning])

        # Only an explicit "no" rules out a wipe.
        will_wipe = not (wipes.ok and wipes.body == "no")
        if will_wipe and not allow_wipe:
            reason = "device reports wipe-on-unlock" if wipes.ok else f"unlock-wipes unreadable ({wipes.body})"
            ReportService.record_change(
                ledger, "oem unlock refused", "device", justification, mutating=False,
                detail=f"{reason}; refused before issuing unlock", clock=clock,
            )
            raise WipeGuardTriggered(
                "unlocking would wipe userdata; disable or bypass the wipe first, or pass --allow-wipe"
            )
        if will_wipe:
            justification = ALLOW_WIPE_PREFIX + justification
            logger.warning("Unlocking with userdata wipe explicitly allowed")

        command = f"oem unlock:{unlock_key}" if unlock_key else "oem unlock"
        response = await session.fastboot_command(command)
        if response.ok:
            ReportService.record_change(
                ledger, "oem unlock", "device", justification, mutating=True, flash_mutating=will_wipe,
                device_command=command, detail=response.body or "OKAY", clock=clock,
            )
            return UnlockResult(unlocked=True, wiped=will_wipe, response=response.body)

        if response.body.startswith("need key"):
            challenge = response.body.split(":", 1)[1].strip() if ":" in response.body else ""
            ReportService.record_change(
                ledger, "oem unlock", "device", justification, mutating=False,
                device_command=command, detail=f"key requested, challenge {challenge}", clock=clock,
            )
            raise UnlockKeyRequired(challenge)

        if response.body == "wrong key":
            ReportService.record_change(
                ledger, "oem unlock", "device", justification, mutating=False,
                detail="key rejected; bootloader unchanged", clock=clock,
            )
            raise WrongKey("device rejected the unlock key")

        raise AcquisitionService._fastboot_failure(response, AcquisitionError)

    @staticmethod
    def _fastboot_failure(response: FastbootResponse, default: type) -> AcquisitionError:
        if response.body == _NOT_IN_FASTBOOT:
            return NotInFastboot(_NOT_IN_FASTBOOT)
        return default(f"device answered FAIL {response.body}")

    # ==================== LIVE OS ====================

    @staticmethod
    async def boot_live_os(
            session: DeviceSession,
            case_dir: Path,
            image: bytes,
            justification: str = BOOT_JUSTIFICATION,
            clock: Clock = system_clock,
    ) -> BootResult:
        """
        Download a live OS image and boot it into RAM.

        Raises:
            TransferFailed: the DATA phase was rejected (empty image, size mismatch)
            BootRefused: bootloader still locked
            NotInFastboot: device is not in bootloader mode
        """
        async with session.fastboot() as connection:
            response = await connection.download(image)
            if not response.ok:
                raise AcquisitionService._fastboot_failure(response, TransferFailed)
            response = await connection.command("boot")
        if not response.ok:
            raise AcquisitionService._fastboot_failure(response, BootRefused)

        image_md5 = hashlib.md5(image).hexdigest()
        ReportService.record_change(
            LedgerRepository(case_dir), "fastboot boot", "device", justification, mutating=True,
            device_command="boot", detail=f"booted live OS into RAM ({len(image)} bytes, md5 {image_md5})",
            clock=clock,
        )
        return BootResult(booted=True, image_size=len(image), image_md5=image_md5)

    # ==================== IMAGING ====================

    @staticmethod
    async def _stream_to_image(
            session: DeviceSession,
            images: ImageRepository,
            partition: str,
            device_path: str,
            tcp_port: int,
            missing: str,
    ) -> Tuple[int, str, str]:
        md5, sha1 = hashlib.md5(), hashlib.sha1()
        size = 0
        async with session.service(ServiceRequest.forward(device_path), port=tcp_port) as (ok, reason, reader):
            if not ok:
                if reason == "no such device":
                    raise UnknownPartition(missing)
                raise ChannelUnavailable(f"forward of {device_path} refused: {reason}")
            try:
                with images.create(partition) as handle:
                    while True:
                        frame = await asyncio.wait_for(read_frame(reader), session.timeout)
                        if frame.is_terminator:
                            break
                        handle.write(frame.payload)
                        md5.update(frame.payload)
                        sha1.update(frame.payload)
                        size += len(frame.payload)
            except (Truncated, MissingTerminator, ConnectionError, asyncio.TimeoutError) as e:
                raise StreamTruncated(f"{partition}: stream ended after {size} bytes without terminator ({e})")
        return size, md5.hexdigest(), sha1.hexdigest()

    @staticmethod
    async def _device_digest(session: DeviceSession, tool: str, device_path: str) -> str:
        ok, output = await session.shell(f"{tool} /{device_path}")
        if not ok:
            raise AcquisitionError(f"{tool} failed on the device: {output}")
        return parse_digest_output(output)

    @staticmethod
    async def _acquire(
            session: DeviceSession,
            case_dir: Path,
            partition: str,
            device_path: str,
            tcp_port: int,
            missing: str,
            clock: Clock,
    ) -> AcquiredImage:
        images = ImageRepository(case_dir)
        size, local_md5, local_sha1 = await AcquisitionService._stream_to_image(
            session, images, partition, device_path, tcp_port, missing,
        )
        device_md5 = await AcquisitionService._device_digest(session, "md5sum", device_path)
        device_sha1 = await AcquisitionService._device_digest(session, "sha1sum", device_path)
        ciphertext = False
        if partition == "userdata":
            _, crypto = await session.getprop("ro.crypto.state")
            ciphertext = crypto == "encrypted"

        verified = local_md5 == device_md5 and local_sha1 == device_sha1
        image = images.save_meta(AcquiredImage(
            partition=partition,
            bytes_path=images.image_path(partition),
            size=size,
            local_md5=local_md5,
            local_sha1=local_sha1,
            device_md5=device_md5,
            device_sha1=device_sha1,
            verified=verified,
            ciphertext=ciphertext,
            device_path="/" + device_path,
            acquired_at=clock(),
        ))
        ReportService.record_change(
            LedgerRepository(case_dir), "acquire", partition, mutating=False,
            detail=f"{size} bytes from /{device_path}; md5 {local_md5}; sha1 {local_sha1}; verified={verified}",
            clock=clock,
        )
        if ciphertext:
            logger.warning(f"{image.file_name} holds ciphertext; examination will refuse to parse it")
        if not verified:
            raise HashMismatch(
                f"{image.file_name}: local md5 {local_md5} / sha1 {local_sha1} differ from device "
                f"md5 {device_md5} / sha1 {device_sha1}",
                image=image,
            )
        logger.info(f"Acquired {image.file_name}: {size} bytes, verified")
        return image

    @staticmethod
    async def acquire_partition(
            session: DeviceSession,
            case_dir: Path,
            partition: str,
            tcp_port: int = DEFAULT_FORWARD_PORT,
            clock: Clock = system_clock,
    ) -> AcquiredImage:
        """
        Stream one flash partition through the forwarded port into
        <partition>.img, hashing as the bytes arrive.

        Args:
            session: Connection to a device running the live OS
            case_dir: Case directory receiving the image, its metadata and the ledger entry
            partition: One of system, userdata, cache, boot, recovery
            tcp_port: Forwarded port the stream is read from
            clock: Timestamp source

        Returns:
            AcquiredImage: Metadata as saved next to the image

        Raises:
            UnknownPartition: no such partition on the device
            EvidenceOverwrite: the image already exists
            StreamTruncated: stream ended before its terminator
            HashMismatch: digests disagree (the unverified image is kept and attached)
        """
        if partition not in PARTITION_NAMES:
            raise UnknownPartition(f"'{partition}' is not one of {', '.join(PARTITION_NAMES)}")
        return await AcquisitionService._acquire(
            session, case_dir, partition, block_device_path(partition), tcp_port,
            f"device has no partition '{partition}'", clock,
        )

    @staticmethod
    async def acquire_sdcard(
            session: DeviceSession,
            case_dir: Path,
            tcp_port: int = DEFAULT_FORWARD_PORT,
            clock: Clock = system_clock,
    ) -> AcquiredImage:
        """Image the physical SD card; an emulated card is imaged as part of userdata."""
        return await AcquisitionService._acquire(
            session, case_dir, SDCARD_PARTITION, SDCARD_PATH, tcp_port,
            f"no physical SD card; the emulated card is inside userdata at {EMULATED_SDCARD}", clock,
        )

    @staticmethod
    async def acquire_all(
            session: DeviceSession,
            case_dir: Path,
            tcp_port: int = DEFAULT_FORWARD_PORT,
            clock: Clock = system_clock,
    ) -> List[AcquiredImage]:
        """
        Image every flash partition in listing order. A hash mismatch does not
        stop the remaining partitions; it is raised once all are written.
        """
        acquired, mismatched = [], []
        for partition in PARTITION_NAMES:
            try:
                acquired.append(await AcquisitionService.acquire_partition(session, case_dir, partition, tcp_port, clock))
            except HashMismatch as e:
                acquired.append(e.image)
                mismatched.append(partition)
        if mismatched:
            raise HashMismatch(f"unverified images: {', '.join(mismatched)}", image=acquired)
        return acquired

    # ==================== VERIFY ====================

    @staticmethod
    def verify_images(case_dir: Path, clock: Clock = system_clock) -> List[Tuple[AcquiredImage, bool]]:
        """
        Re-hash every image on disk against both digest pairs in its metadata.

        Returns:
            (image, passed) for every image in file-name order

        Raises:
            HashMismatch: any image failed; raised after all were checked
        """
        images = ImageRepository(case_dir)
        results = []
        for image in images.get_all():
            path = images.image_path(image.partition)
            if path.exists():
                md5, sha1 = hash_file(path)
                passed = image.verified and (md5, sha1) == (image.local_md5, image.local_sha1)
            else:
                passed = False
            level = logging.INFO if passed else logging.WARNING
            logger.log(level, f"Verify {image.file_name}: {'OK' if passed else 'FAILED'}")
            results.append((image, passed))

        failed = [image.file_name for image, passed in results if not passed]
        ReportService.record_change(
            LedgerRepository(case_dir), "verify", "case", mutating=False,
            detail=f"{len(results)} images re-hashed; failed: {', '.join(failed) or 'none'}",
            clock=clock,
        )
        if failed:
            raise HashMismatch(f"verification failed for {', '.join(failed)}")
        return results
