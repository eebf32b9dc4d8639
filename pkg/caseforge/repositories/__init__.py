# caseforge/repositories/__init__.py
"""
Repository Layer

Data access for the case directory (ledger, images, findings, case files)
and for the AccountManager tables the simulator writes.
"""

from caseforge.repositories.accounts_repository import AccountsRepository
from caseforge.repositories.base_repository import BaseRepository
from caseforge.repositories.case_repository import CaseRepository
from caseforge.repositories.findings_repository import FindingsRepository
from caseforge.repositories.image_repository import ImageRepository
from caseforge.repositories.ledger_repository import LedgerRepository

__all__ = [
    "AccountsRepository",
    "BaseRepository",
    "CaseRepository",
    "FindingsRepository",
    "ImageRepository",
    "LedgerRepository",
]
