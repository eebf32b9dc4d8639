# caseforge/protocol/messages.py
"""
Request and response vocabulary for the two device channels.

Service channel: one framed ServiceRequest, answered by a framed OKAY or
FAIL<reason>. Fastboot channel: framed commands, answered by framed
FastbootResponse payloads (4-byte status + body).
"""

from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, field_validator

from caseforge.core.errors import ProtocolError

SERVICE_KINDS = ("getprop", "shell", "forward", "logcat")


class ServiceRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    service: str

    @field_validator("service")
    @classmethod
    def validate_service(cls, service: str) -> str:
        if "\n" in service or "\r" in service:
            raise ValueError("service text must not contain a newline")
        kind = service.split(":", 1)[0]
        if kind not in SERVICE_KINDS:
            raise ValueError(f"unknown service '{kind}', expected one of {', '.join(SERVICE_KINDS)}")
        if kind != "logcat" and ":" not in service:
            raise ValueError(f"service '{kind}' needs an argument")
        return service

    @property
    def kind(self) -> str:
        return self.service.split(":", 1)[0]

    @property
    def argument(self) -> str:
        return self.service.split(":", 1)[1] if ":" in self.service else ""

    def encode(self) -> bytes:
        return self.service.encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> "ServiceRequest":
        try:
            return cls(service=payload.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as e:
            raise ProtocolError(f"malformed service request: {e}") from e

    @classmethod
    def getprop(cls, name: str) -> "ServiceRequest":
        return cls(service=f"getprop:{name}")

    @classmethod
    def shell(cls, command: str) -> "ServiceRequest":
        return cls(service=f"shell:{command}")

    @classmethod
    def forward(cls, device_path: str) -> "ServiceRequest":
        return cls(service=f"forward:{device_path}")

    @classmethod
    def logcat(cls) -> "ServiceRequest":
        return cls(service="logcat")


class FastbootStatus(str, Enum):
    OKAY = "OKAY"
    FAIL = "FAIL"
    INFO = "INFO"
    DATA = "DATA"


class FastbootResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: FastbootStatus
    body: str = ""

    def encode(self) -> bytes:
        return self.status.value.encode("ascii") + self.body.encode("utf-8")

    @classmethod
    def decode(cls, payload: bytes) -> "FastbootResponse":
        head, body = payload[:4], payload[4:]
        try:
            status = FastbootStatus(head.decode("ascii"))
            return cls(status=status, body=body.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as e:
            raise ProtocolError(f"malformed fastboot response {bytes(payload[:16])!r}") from e

    @property
    def ok(self) -> bool:
        return self.status is FastbootStatus.OKAY

    def data_size(self) -> int:
        """Byte count announced by a DATA response (8 hex digits)."""
        if self.status is not FastbootStatus.DATA or len(self.body) != 8:
            raise ProtocolError(f"not a DATA response: {self.status.value}{self.body}")
        return int(self.body, 16)


def okay(body: str = "") -> FastbootResponse:
    return FastbootResponse(status=FastbootStatus.OKAY, body=body)


def fail(body: str) -> FastbootResponse:
    return FastbootResponse(status=FastbootStatus.FAIL, body=body)


def split_status(payload: bytes) -> Tuple[bool, str]:
    """Split a service-channel status frame into (ok, reason)."""
    if payload == b"OKAY":
        return True, ""
    if payload.startswith(b"FAIL"):
        return False, payload[4:].decode("utf-8", errors="replace")
    raise ProtocolError(f"unexpected service status {bytes(payload[:16])!r}")
