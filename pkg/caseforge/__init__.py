"""caseforge - forensic acquisition and analysis toolkit for Android devices."""

__version__ = "1.0.0"
