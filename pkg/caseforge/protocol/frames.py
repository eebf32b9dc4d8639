# caseforge/protocol/frames.py
"""
Frame codec.

A frame is 4 hex digits giving the payload length, followed by the payload.
The zero-length frame "0000" terminates a stream. The codec functions are pure;
the async helpers below only add reading from / writing to asyncio streams.
"""

import asyncio
import string
from typing import Iterator, Tuple

from pydantic import BaseModel, ConfigDict, field_validator

from caseforge.core.config import MAX_FRAME_PAYLOAD
from caseforge.core.errors import BadLengthHeader, MissingTerminator, PayloadTooLarge, Truncated

HEADER_SIZE = 4
TERMINATOR = b"0000"
_HEX = frozenset(string.hexdigits.encode("ascii"))


class Frame(BaseModel):
    model_config = ConfigDict(frozen=True)

    payload: bytes = b""

    @field_validator("payload")
    @classmethod
    def validate_length(cls, payload: bytes) -> bytes:
        if len(payload) > MAX_FRAME_PAYLOAD:
            raise ValueError(f"frame payload of {len(payload)} bytes exceeds {MAX_FRAME_PAYLOAD}")
        return payload

    @property
    def is_terminator(self) -> bool:
        return not self.payload


def encode_frame(payload: bytes) -> bytes:
    """Encode one payload as header + payload. Uppercase hex on the way out."""
    if len(payload) > MAX_FRAME_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_FRAME_PAYLOAD}")
    return b"%04X" % len(payload) + bytes(payload)


def _parse_header(header: bytes) -> int:
    if len(header) != HEADER_SIZE or any(b not in _HEX for b in header):
        raise BadLengthHeader(f"bad frame length header {bytes(header)!r}")
    return int(header, 16)


def decode_frame(data: bytes, offset: int = 0) -> Tuple[Frame, int]:
    """
    Decode the frame starting at `offset`.

    Returns:
        (frame, consumed) where consumed = 4 + payload length

    Raises:
        BadLengthHeader: header is not 4 hex digits
        Truncated: fewer bytes available than the header declares
    """
    header = data[offset:offset + HEADER_SIZE]
    if len(header) < HEADER_SIZE:
        raise Truncated(f"need {HEADER_SIZE} header bytes, have {len(header)}")
    length = _parse_header(header)
    start = offset + HEADER_SIZE
    payload = data[start:start + length]
    if len(payload) < length:
        raise Truncated(f"frame declares {length} bytes, stream has {len(payload)}")
    return Frame(payload=bytes(payload)), HEADER_SIZE + length


def read_stream(data: bytes) -> bytes:
    """Concatenate frame payloads up to (excluding) the first terminator frame."""
    out = bytearray()
    offset = 0
    while True:
        if offset >= len(data):
            raise MissingTerminator(f"stream ended after {len(out)} payload bytes without terminator")
        frame, consumed = decode_frame(data, offset)
        offset += consumed
        if frame.is_terminator:
            return bytes(out)
        out += frame.payload


def chunk_stream(data: bytes, chunk_size: int = MAX_FRAME_PAYLOAD) -> Iterator[bytes]:
    """Yield encoded frames carrying `data`, then the terminator."""
    if not 0 < chunk_size <= MAX_FRAME_PAYLOAD:
        raise PayloadTooLarge(f"chunk size {chunk_size} outside 1..{MAX_FRAME_PAYLOAD}")
    view = memoryview(data)
    for start in range(0, len(view), chunk_size):
        yield encode_frame(view[start:start + chunk_size])
    yield TERMINATOR


# ==================== ASYNC STREAM HELPERS ====================

async def read_frame(reader: asyncio.StreamReader) -> Frame:
    """Read exactly one frame from an asyncio stream."""
    try:
        header = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as e:
        if not e.partial:
            raise MissingTerminator("connection closed before next frame") from e
        raise Truncated(f"need {HEADER_SIZE} header bytes, have {len(e.partial)}") from e
    length = _parse_header(header)
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as e:
        raise Truncated(f"frame declares {length} bytes, stream has {len(e.partial)}") from e
    return Frame(payload=payload)


async def read_stream_async(reader: asyncio.StreamReader) -> bytes:
    """Async counterpart of read_stream."""
    out = bytearray()
    while True:
        frame = await read_frame(reader)
        if frame.is_terminator:
            return bytes(out)
        out += frame.payload


async def write_stream(writer: asyncio.StreamWriter, data: bytes, chunk_size: int = MAX_FRAME_PAYLOAD) -> None:
    for frame in chunk_stream(data, chunk_size):
        writer.write(frame)
    await writer.drain()
