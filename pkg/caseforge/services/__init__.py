# caseforge/services/__init__.py
from . import accounts_service, acquisition_service, app_scan_service, examination_service, heap_service, report_service

__all__ = [
    "accounts_service",
    "acquisition_service",
    "app_scan_service",
    "examination_service",
    "heap_service",
    "report_service",
]
