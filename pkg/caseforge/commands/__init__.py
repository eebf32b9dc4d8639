# caseforge/commands/__init__.py
from . import analyze, collection, examine, monitor, report, simulate

__all__ = ["analyze", "collection", "examine", "monitor", "report", "simulate"]
