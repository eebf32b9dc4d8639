# caseforge/schemas/report.py
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from caseforge.schemas.acquisition import AcquiredImage, ChangeLedgerEntry, DeviceIdentity

DEFAULT_FORWARD_PORT = 7000


class CaseConfig(BaseModel):
    """Contents of case.json, written once when the case directory is created."""
    case_id: str = Field(..., min_length=1)
    case_dir: Path
    host: str = "127.0.0.1"
    service_port: int = Field(5555, ge=0, le=65535)
    fastboot_port: int = Field(5554, ge=0, le=65535)
    tcp_port: int = Field(DEFAULT_FORWARD_PORT, ge=0, le=65535)
    created: int = 0

    @field_validator("case_id")
    @classmethod
    def validate_case_id(cls, case_id: str) -> str:
        if "/" in case_id or case_id in (".", ".."):
            raise ValueError(f"case id '{case_id}' must be a plain name")
        return case_id


class ImageSection(BaseModel):
    image: AcquiredImage
    hash_statement: str
    unverified: bool = False


class CaseReport(BaseModel):
    case_id: str
    created: int
    tool_version: str
    device: Optional[DeviceIdentity] = None
    images: List[ImageSection] = Field(default_factory=list)
    ledger: List[ChangeLedgerEntry] = Field(default_factory=list)
    ledger_chain_valid: bool = True
    findings: Dict[str, Any] = Field(default_factory=dict)
    annotations: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_accounting(self) -> "CaseReport":
        for entry in self.ledger:
            if entry.mutating and not entry.justification.strip():
                raise ValueError(f"ledger entry {entry.seq} is mutating but unjustified")
        return self

    @property
    def mutating_entries(self) -> List[ChangeLedgerEntry]:
        return [entry for entry in self.ledger if entry.mutating]
