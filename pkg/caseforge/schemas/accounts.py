# caseforge/schemas/accounts.py
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

UNPARSED_PACKAGE = "<unparsed>"


class AccountRecord(BaseModel):
    """
    One account joined with its authtokens and extras.

    password may hold a password, a token, or be blank.
    """
    id: int
    name: str
    type: str
    password: Optional[str] = None
    authtokens: List[Tuple[str, Optional[str]]] = Field(default_factory=list)
    extras: List[Tuple[str, Optional[str]]] = Field(default_factory=list)


class OrphanRow(BaseModel):
    """authtokens / extras row whose account id matches no account."""
    table: str
    account_id: Optional[int]
    key: str
    value: Optional[str] = None


class AccountsExtraction(BaseModel):
    records: List[AccountRecord] = Field(default_factory=list)
    orphans: List[OrphanRow] = Field(default_factory=list)
    provenance: str
    warnings: List[str] = Field(default_factory=list)


class DeodexWorkItem(BaseModel):
    package: str
    first_seen: int
    occurrences: int = Field(1, ge=1)
    flagged: bool = False
