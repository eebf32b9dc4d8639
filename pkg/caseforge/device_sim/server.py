# caseforge/device_sim/server.py
"""
asyncio TCP front end for a DeviceSimulator.

Three listeners share one simulator:
- service channel: one framed ServiceRequest per connection
- fastboot channel: framed commands until the client disconnects
- forward port: the service channel again, the way "adb forward tcp:7000"
  exposes a device node on a local port

Requests are serialized with a lock: one service session or one fastboot
command at a time, so the simulator never sees two at once.
"""

import asyncio
import logging
from typing import Optional

from caseforge.core.errors import CaseforgeError, ProtocolError
from caseforge.device_sim.device import DeviceSimulator
from caseforge.protocol.frames import encode_frame, read_frame, read_stream_async
from caseforge.protocol.messages import FastbootResponse, FastbootStatus, ServiceRequest, fail

logger = logging.getLogger(__name__)


class DeviceServer:
    """Serve a simulator on ephemeral (port 0) or fixed ports."""

    def __init__(
            self,
            simulator: DeviceSimulator,
            host: str = "127.0.0.1",
            service_port: int = 0,
            fastboot_port: int = 0,
            forward_port: int = 0,
    ):
        self.simulator = simulator
        self.host = host
        self._requested = {"service": service_port, "fastboot": fastboot_port, "forward": forward_port}
        self._servers: dict = {}
        self._lock = asyncio.Lock()

    # ==================== LIFECYCLE ====================

    async def start(self) -> "DeviceServer":
        handlers = {
            "service": self._serve_service,
            "fastboot": self._serve_fastboot,
            "forward": self._serve_service,
        }
        for name, handler in handlers.items():
            self._servers[name] = await asyncio.start_server(handler, self.host, self._requested[name])
        logger.info(
            f"Simulator listening on {self.host}: service {self.service_port}, "
            f"fastboot {self.fastboot_port}, forward {self.forward_port}"
        )
        return self

    async def stop(self) -> None:
        for server in self._servers.values():
            server.close()
            await server.wait_closed()
        self._servers.clear()

    async def serve_forever(self) -> None:
        await asyncio.gather(*(server.serve_forever() for server in self._servers.values()))

    async def __aenter__(self) -> "DeviceServer":
        return await self.start()

    async def __aexit__(self, *exc) -> None:
        await self.stop()

    def _port(self, name: str) -> Optional[int]:
        server = self._servers.get(name)
        if server is None:
            return None
        return server.sockets[0].getsockname()[1]

    @property
    def service_port(self) -> Optional[int]:
        return self._port("service")

    @property
    def fastboot_port(self) -> Optional[int]:
        return self._port("fastboot")

    @property
    def forward_port(self) -> Optional[int]:
        return self._port("forward")

    # ==================== HANDLERS ====================

    async def _serve_service(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            frame = await read_frame(reader)
            try:
                request = ServiceRequest.decode(frame.payload)
            except ProtocolError as e:
                writer.write(encode_frame(b"FAIL" + e.detail.encode("utf-8")))
                await writer.drain()
                return
            logger.debug(f"service <- {request.service}")
            async with self._lock:
                for chunk in self.simulator.iter_service(request):
                    writer.write(chunk)
                    await writer.drain()
        except (CaseforgeError, ConnectionError) as e:
            logger.debug(f"service session ended: {e}")
        finally:
            await self._close(writer)

    async def _serve_fastboot(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                try:
                    frame = await read_frame(reader)
                except CaseforgeError:
                    break
                command = frame.payload.decode("utf-8", errors="replace")
                logger.debug(f"fastboot <- {command}")
                # Lock per command, not per connection.
                async with self._lock:
                    await self._dispatch_fastboot(command, reader, writer)
        except ConnectionError as e:
            logger.debug(f"fastboot session ended: {e}")
        finally:
            await self._close(writer)

    async def _dispatch_fastboot(self, command: str, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        if command.startswith("download:"):
            await self._download(command, reader, writer)
            return
        if command == "boot":
            response = self.simulator.handle_fastboot(command, self.simulator.pending_download)
        else:
            response = self.simulator.handle_fastboot(command)
        await self._respond(writer, response)

    async def _download(self, command: str, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        """DATA phase: announce the size, receive a framed stream, confirm."""
        try:
            size = int(command[len("download:"):], 16)
        except ValueError:
            await self._respond(writer, fail(f"bad download size '{command}'"))
            return
        response = self.simulator.begin_download(size)
        await self._respond(writer, response)
        if response.status is not FastbootStatus.DATA:
            return
        data = await read_stream_async(reader)
        await self._respond(writer, self.simulator.finish_download(data, size))

    @staticmethod
    async def _respond(writer: asyncio.StreamWriter, response: FastbootResponse) -> None:
        logger.debug(f"fastboot -> {response.status.value}{response.body}")
        writer.write(encode_frame(response.encode()))
        await writer.drain()

    @staticmethod
    async def _close(writer: asyncio.StreamWriter) -> None:
        writer.close()
        try:
            await writer.wait_closed()
        except ConnectionError:
            pass
