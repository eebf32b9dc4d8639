# caseforge/acquisition/session.py
"""
Practitioner-side transport to a device.

Every service request opens its own connection (the way each adb host
request does); fastboot commands run on a short-lived connection so the
device is never held between stages.
"""

import asyncio
import logging
from contextlib import asynccontextmanager
from typing import AsyncIterator, List, Optional, Tuple

from caseforge.core.config import Settings
from caseforge.core.errors import ChannelUnavailable, ProtocolError
from caseforge.protocol.frames import encode_frame, read_frame, read_stream_async, write_stream
from caseforge.protocol.messages import FastbootResponse, FastbootStatus, ServiceRequest, split_status

logger = logging.getLogger(__name__)

Streams = Tuple[asyncio.StreamReader, asyncio.StreamWriter]


class DeviceSession:
    """Connection parameters plus the request helpers of both channels."""

    def __init__(
            self,
            host: str = "127.0.0.1",
            service_port: int = 5555,
            fastboot_port: int = 5554,
            timeout: float = 5.0,
    ):
        self.host = host
        self.service_port = service_port
        self.fastboot_port = fastboot_port
        self.timeout = timeout

    @classmethod
    def from_settings(cls, settings: Settings) -> "DeviceSession":
        return cls(settings.host, settings.service_port, settings.fastboot_port, settings.connect_timeout)

    async def _connect(self, port: int, channel: str) -> Streams:
        try:
            return await asyncio.wait_for(asyncio.open_connection(self.host, port), self.timeout)
        except (OSError, asyncio.TimeoutError) as e:
            raise ChannelUnavailable(f"{channel} channel at {self.host}:{port} unreachable: {e}")

    @staticmethod
    async def _close(writer: asyncio.StreamWriter) -> None:
        writer.close()
        try:
            await writer.wait_closed()
        except ConnectionError:
            pass

    # ==================== SERVICE CHANNEL ====================

    @asynccontextmanager
    async def service(self, request: ServiceRequest, port: Optional[int] = None) -> AsyncIterator[Tuple[bool, str, asyncio.StreamReader]]:
        """
        Send one request and read the status frame.

        Yields:
            (ok, failure reason, reader positioned at the response body)
        """
        reader, writer = await self._connect(port or self.service_port, "service")
        try:
            writer.write(encode_frame(request.encode()))
            await writer.drain()
            try:
                status = await asyncio.wait_for(read_frame(reader), self.timeout)
            except (ProtocolError, ConnectionError, asyncio.TimeoutError) as e:
                raise ChannelUnavailable(f"no status for '{request.service}': {e}")
            ok, reason = split_status(status.payload)
            logger.debug(f"service {request.service} -> {'OKAY' if ok else 'FAIL ' + reason}")
            yield ok, reason, reader
        finally:
            await self._close(writer)

    async def getprop(self, name: str) -> Tuple[bool, str]:
        async with self.service(ServiceRequest.getprop(name)) as (ok, reason, reader):
            if not ok:
                return False, reason
            frame = await read_frame(reader)
            return True, frame.payload.decode("utf-8", errors="replace")

    async def shell(self, command: str) -> Tuple[bool, str]:
        async with self.service(ServiceRequest.shell(command)) as (ok, reason, reader):
            if not ok:
                return False, reason
            output = await read_stream_async(reader)
            return True, output.decode("utf-8", errors="replace")

    async def logcat(self) -> Tuple[bool, str]:
        async with self.service(ServiceRequest.logcat()) as (ok, reason, reader):
            if not ok:
                return False, reason
            output = await read_stream_async(reader)
            return True, output.decode("utf-8", errors="replace")

    # ==================== FASTBOOT CHANNEL ====================

    @asynccontextmanager
    async def fastboot(self) -> AsyncIterator["FastbootConnection"]:
        reader, writer = await self._connect(self.fastboot_port, "fastboot")
        try:
            yield FastbootConnection(reader, writer, self.timeout)
        finally:
            await self._close(writer)

    async def fastboot_command(self, command: str) -> FastbootResponse:
        async with self.fastboot() as connection:
            return await connection.command(command)

    async def getvars(self, *names: str) -> List[FastbootResponse]:
        async with self.fastboot() as connection:
            return [await connection.command(f"getvar:{name}") for name in names]


class FastbootConnection:

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, timeout: float):
        self.reader = reader
        self.writer = writer
        self.timeout = timeout

    async def _response(self, command: str) -> FastbootResponse:
        try:
            frame = await asyncio.wait_for(read_frame(self.reader), self.timeout)
        except (ProtocolError, ConnectionError, asyncio.TimeoutError) as e:
            raise ChannelUnavailable(f"no fastboot response to '{command}': {e}")
        response = FastbootResponse.decode(frame.payload)
        logger.debug(f"fastboot {command} -> {response.status.value}{response.body}")
        return response

    async def command(self, command: str) -> FastbootResponse:
        self.writer.write(encode_frame(command.encode("utf-8")))
        await self.writer.drain()
        return await self._response(command)

    async def download(self, data: bytes) -> FastbootResponse:
        """
        DATA phase: announce the size, stream the bytes once the device
        answers DATA, then return the device's verdict.
        """
        command = f"download:{len(data):08x}"
        response = await self.command(command)
        if response.status is not FastbootStatus.DATA:
            return response
        if response.data_size() != len(data):
            raise ProtocolError(f"device expects {response.data_size()} bytes, have {len(data)}")
        await write_stream(self.writer, data)
        return await self._response(command)
