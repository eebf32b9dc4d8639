# caseforge/schemas/device.py
"""
Pydantic schemas for the simulated device.

DeviceProfile is the runtime state (raw partition bytes). ProfileConfig is the
declarative JSON form a profile is loaded from.
"""

import re
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Listing order of the partitions of a typical device.
PARTITION_NAMES = ("system", "userdata", "cache", "boot", "recovery")

_CHALLENGE_RE = re.compile(r"^[0-9a-f]{16}$")


class BootState(str, Enum):
    STOCK_LOCKED = "StockLocked"
    STOCK_UNLOCKED_SCREEN = "StockUnlockedScreen"
    FASTBOOT_MODE = "FastbootMode"
    LIVE_OS = "LiveOs"


class BootloaderState(str, Enum):
    LOCKED = "Locked"
    UNLOCK_PENDING_KEY = "UnlockPendingKey"
    UNLOCKED = "Unlocked"


class StoredAccount(BaseModel):
    """Account held by the device's AccountManager secure store."""
    id: int = Field(..., ge=0)
    name: str
    type: str
    password: Optional[str] = None
    authtokens: List[Tuple[str, str]] = Field(default_factory=list)
    extras: List[Tuple[str, str]] = Field(default_factory=list)

    @field_validator("extras")
    @classmethod
    def validate_unique_extras(cls, extras: List[Tuple[str, str]]) -> List[Tuple[str, str]]:
        keys = [key for key, _ in extras]
        if len(keys) != len(set(keys)):
            raise ValueError("extras keys must be unique per account")
        return extras

    def extra(self, key: str) -> Optional[str]:
        """Absent keys yield None, as AccountManager returns null for unused keys."""
        return dict(self.extras).get(key)


class LogLine(BaseModel):
    model_config = ConfigDict(frozen=True)

    timestamp: int
    tag: str
    message: str

    def render(self) -> str:
        return f"{self.timestamp} {self.tag}: {self.message}\n"


class TransportFaults(BaseModel):
    """Faults injected into forward streams, for integrity testing."""
    flip_bit: Optional[int] = Field(None, ge=0)
    truncate_at: Optional[int] = Field(None, ge=0)


class DeviceProfile(BaseModel):
    model_config = ConfigDict(validate_assignment=True)

    model: str = "SimPhone"
    product: str = "simphone"
    android_version: str = "4.4.2"
    boot_state: BootState = BootState.FASTBOOT_MODE
    bootloader: BootloaderState = BootloaderState.LOCKED
    unlock_challenge: Optional[str] = None
    unlock_key: Optional[str] = None
    wipe_on_unlock: bool = False
    wipe_bypass_applied: bool = False
    reports_unlock_wipes: bool = True
    screen_lock_enabled: bool = True
    encryption_enabled: bool = False
    encryption_key_byte: int = Field(0x5A, ge=1, le=255)
    partitions: Dict[str, bytes]
    sdcard: Optional[bytes] = None
    accounts_store: List[StoredAccount] = Field(default_factory=list)
    signature_check_bypassed: bool = False
    logcat_log: List[LogLine] = Field(default_factory=list)
    faults: TransportFaults = Field(default_factory=TransportFaults)

    @field_validator("partitions")
    @classmethod
    def validate_partitions(cls, partitions: Dict[str, bytes]) -> Dict[str, bytes]:
        if set(partitions) != set(PARTITION_NAMES):
            raise ValueError(f"partitions must be exactly {', '.join(PARTITION_NAMES)}")
        return partitions

    @field_validator("unlock_challenge")
    @classmethod
    def validate_challenge(cls, challenge: Optional[str]) -> Optional[str]:
        if challenge is not None and not _CHALLENGE_RE.match(challenge):
            raise ValueError("unlock challenge must be 16 lowercase hex digits")
        return challenge

    @field_validator("accounts_store")
    @classmethod
    def validate_unique_ids(cls, accounts: List[StoredAccount]) -> List[StoredAccount]:
        ids = [account.id for account in accounts]
        if len(ids) != len(set(ids)):
            raise ValueError("account ids must be unique")
        return accounts

    @model_validator(mode="after")
    def validate_key_pairing(self) -> "DeviceProfile":
        if (self.unlock_key is None) != (self.unlock_challenge is None):
            raise ValueError("unlock_key and unlock_challenge must be given together")
        return self

    @property
    def requires_unlock_key(self) -> bool:
        return self.unlock_key is not None

    @property
    def unlock_wipes(self) -> bool:
        return self.wipe_on_unlock and not self.wipe_bypass_applied


# ==================== DECLARATIVE PROFILE CONFIG ====================

class FileSpec(BaseModel):
    """One file or directory of an initial file tree."""
    path: str
    kind: str = Field("file", pattern="^(file|dir)$")
    mtime: int = 0
    text: Optional[str] = None
    hex: Optional[str] = None

    @model_validator(mode="after")
    def validate_content(self) -> "FileSpec":
        if self.text is not None and self.hex is not None:
            raise ValueError(f"{self.path}: give text or hex, not both")
        if self.kind == "dir" and (self.text or self.hex):
            raise ValueError(f"{self.path}: directories carry no content")
        return self

    def content(self) -> bytes:
        if self.hex is not None:
            return bytes.fromhex(self.hex)
        return (self.text or "").encode("utf-8")


class PartitionSpec(BaseModel):
    """
    A partition either as a snapshot archive (files + slack) or as raw filler.

    size pads the serialized bytes with zeros up to the given length.
    """
    files: Optional[List[FileSpec]] = None
    slack_text: str = ""
    fill_hex: str = ""
    size: Optional[int] = Field(None, ge=0)


class ProfileConfig(BaseModel):
    model: str = "SimPhone"
    product: str = "simphone"
    android_version: str = "4.4.2"
    boot_state: BootState = BootState.FASTBOOT_MODE
    bootloader: BootloaderState = BootloaderState.LOCKED
    unlock_challenge: Optional[str] = None
    unlock_key: Optional[str] = None
    wipe_on_unlock: bool = False
    wipe_bypass_applied: bool = False
    reports_unlock_wipes: bool = True
    screen_lock_enabled: bool = True
    encryption_enabled: bool = False
    signature_check_bypassed: bool = False
    partitions: Dict[str, PartitionSpec] = Field(default_factory=dict)
    sdcard: Optional[PartitionSpec] = None
    accounts: List[StoredAccount] = Field(default_factory=list)
    materialize_accounts_db: bool = True
    faults: TransportFaults = Field(default_factory=TransportFaults)

    @field_validator("partitions")
    @classmethod
    def validate_partition_names(cls, partitions: Dict[str, PartitionSpec]) -> Dict[str, PartitionSpec]:
        unknown = set(partitions) - set(PARTITION_NAMES)
        if unknown:
            raise ValueError(f"unknown partitions: {', '.join(sorted(unknown))}")
        return partitions
