"""Length-framed wire codec shared by the simulator and the acquisition client."""

from caseforge.protocol.frames import (
    Frame,
    chunk_stream,
    decode_frame,
    encode_frame,
    read_frame,
    read_stream,
    read_stream_async,
    write_stream,
)
from caseforge.protocol.messages import FastbootResponse, FastbootStatus, ServiceRequest

__all__ = [
    "Frame",
    "FastbootResponse",
    "FastbootStatus",
    "ServiceRequest",
    "chunk_stream",
    "decode_frame",
    "encode_frame",
    "read_frame",
    "read_stream",
    "read_stream_async",
    "write_stream",
]
