# caseforge/schemas/acquisition.py
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from caseforge.validators.common_validators import validate_justification, validate_md5, validate_sha1

UNKNOWN_LOCKED = "unknown (locked)"


class DeviceIdentity(BaseModel):
    model: str
    android_version: str = Field(..., min_length=1)
    bootloader_state: str
    encryption_suspected: bool = False
    screen_lock: bool = True
    product: Optional[str] = None
    channel: str = "service"  # which channel answered: service or fastboot


class ChangeLedgerEntry(BaseModel):
    """
    One line of ledger.jsonl.

    mutating: the operation changed device state.
    flash_mutating: the operation changed bytes on flash (unlock with wipe).
    device_command: fastboot command to replay against a fresh profile, if any.
    """
    model_config = ConfigDict(frozen=True)

    seq: int = Field(..., ge=1)
    timestamp: int = Field(..., ge=0)
    operation: str = Field(..., min_length=1)
    target: str
    justification: str = ""
    mutating: bool = False
    flash_mutating: bool = False
    device_command: Optional[str] = None
    detail: str = ""
    prev_hash: str = ""
    record_hash: str = ""

    @model_validator(mode="after")
    def validate_accounting(self) -> "ChangeLedgerEntry":
        validate_justification(self.justification, self.mutating)
        if self.flash_mutating and not self.mutating:
            raise ValueError("a flash-mutating entry must also be mutating")
        return self

    def hashed_fields(self) -> dict:
        """Everything except record_hash, the input of the chain digest."""
        return self.model_dump(exclude={"record_hash"})


class AcquiredImage(BaseModel):
    """Contents of <partition>.img.meta."""
    partition: str
    bytes_path: Path
    size: int = Field(..., ge=0)
    local_md5: str
    local_sha1: str
    device_md5: str
    device_sha1: str
    verified: bool
    ciphertext: bool = False
    device_path: str = ""
    acquired_at: int = 0

    @field_validator("local_md5", "device_md5")
    @classmethod
    def validate_md5_digest(cls, value: str) -> str:
        return validate_md5(value)

    @field_validator("local_sha1", "device_sha1")
    @classmethod
    def validate_sha1_digest(cls, value: str) -> str:
        return validate_sha1(value)

    @model_validator(mode="after")
    def validate_verdict(self) -> "AcquiredImage":
        agree = self.local_md5 == self.device_md5 and self.local_sha1 == self.device_sha1
        if self.verified != agree:
            raise ValueError("verified must hold exactly when both digest pairs agree")
        return self

    @property
    def file_name(self) -> str:
        return Path(self.bytes_path).name


class UnlockResult(BaseModel):
    unlocked: bool
    already_unlocked: bool = False
    wiped: bool = False
    response: str = ""
    warnings: list = Field(default_factory=list)


class BootResult(BaseModel):
    booted: bool
    image_size: int
    image_md5: str
