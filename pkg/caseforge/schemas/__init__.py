# caseforge/schemas/__init__.py
from . import accounts, acquisition, apps, artifacts, device, evidence, heap, report

__all__ = ["accounts", "acquisition", "apps", "artifacts", "device", "evidence", "heap", "report"]
